//! Confounded sampling distributions.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::PerturbationId;
use crate::error::{Error, Result};
use crate::forecast::baselines::keyed_rng;
use crate::metrics::ResidualRecord;

/// Which sensitive attribute plays the confounder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confounder {
    Company,
    Industry,
}

impl Confounder {
    pub fn class_of<'a>(&self, r: &'a ResidualRecord) -> &'a str {
        match self {
            Confounder::Company => &r.entity_id,
            Confounder::Industry => &r.industry,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Confounder::Company => "Company",
            Confounder::Industry => "Industry",
        }
    }
}

impl std::fmt::Display for Confounder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub tag: String,
    pub confounder: Confounder,
    pub favored_value: String,
    pub treated_weight: f64,
    pub control_weight: f64,
    pub sample_size: usize,
    pub seed: u64,
}

impl DistributionSpec {
    pub fn new(tag: &str, confounder: Confounder, favored_value: &str, sample_size: usize, seed: u64) -> Self {
        Self {
            tag: tag.to_string(),
            confounder,
            favored_value: favored_value.to_string(),
            treated_weight: 2.0,
            control_weight: 1.0,
            sample_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("treated_weight", self.treated_weight),
            ("control_weight", self.control_weight),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Argument(format!(
                    "{}: {name} must be positive, got {w}",
                    self.tag
                )));
            }
        }
        Ok(())
    }
}

/// The default distribution family: one per company (`DC1..`) and one
/// per industry (`DI1..`), each favouring a single class, plus an optional
/// uniform `D0`.
pub fn default_specs(
    entity_industry: &BTreeMap<String, String>,
    sample_size: usize,
    seed: u64,
    include_uniform: bool,
) -> Vec<DistributionSpec> {
    let mut specs = Vec::new();
    if include_uniform {
        if let Some(first) = entity_industry.keys().next() {
            let mut d0 = DistributionSpec::new("D0", Confounder::Company, first, sample_size, seed);
            d0.treated_weight = 1.0;
            specs.push(d0);
        }
    }
    for (i, entity) in entity_industry.keys().enumerate() {
        specs.push(DistributionSpec::new(
            &format!("DC{}", i + 1),
            Confounder::Company,
            entity,
            sample_size,
            seed,
        ));
    }
    let industries: BTreeSet<&String> = entity_industry.values().collect();
    for (i, ind) in industries.into_iter().enumerate() {
        specs.push(DistributionSpec::new(
            &format!("DI{}", i + 1),
            Confounder::Industry,
            ind,
            sample_size,
            seed,
        ));
    }
    specs
}

/// Weighted sampling without replacement over the `{pi, P0}` pool.
///
/// Each record gets the key `u^(1/w)` from a stream seeded by
/// `(seed, tag, pi)` and the `sample_size` largest keys are kept.
/// Records favoured by the spec (its class under `pi`) get
/// `treated_weight`, all others `control_weight`. Output is sorted by
/// window id.
pub fn build_distribution<'a>(
    records: &[&'a ResidualRecord],
    pi: PerturbationId,
    spec: &DistributionSpec,
) -> Result<Vec<&'a ResidualRecord>> {
    spec.validate()?;
    if pi == PerturbationId::P0 {
        return Err(Error::Argument("treatment perturbation must differ from P0".into()));
    }
    let mut pool: Vec<&ResidualRecord> = records
        .iter()
        .copied()
        .filter(|r| r.perturbation == pi || r.perturbation == PerturbationId::P0)
        .collect();
    pool.sort_by(|a, b| a.window_id.cmp(&b.window_id));

    let mut has_control: BTreeMap<&str, bool> = BTreeMap::new();
    for r in &pool {
        let e = has_control.entry(spec.confounder.class_of(r)).or_insert(false);
        *e |= r.perturbation == PerturbationId::P0;
    }
    if !has_control.contains_key(spec.favored_value.as_str()) {
        return Err(Error::Sampling(format!(
            "{}: favoured {} '{}' not present in pool",
            spec.tag, spec.confounder, spec.favored_value
        )));
    }
    if let Some((class, _)) = has_control.iter().find(|(_, c)| !**c) {
        return Err(Error::Sampling(format!(
            "{}: {} '{class}' has no P0 records",
            spec.tag, spec.confounder
        )));
    }
    if spec.sample_size > pool.len() {
        return Err(Error::Sampling(format!(
            "{}: sample size {} exceeds pool of {}",
            spec.tag,
            spec.sample_size,
            pool.len()
        )));
    }

    let mut rng = keyed_rng(spec.seed, &format!("{}/{}", spec.tag, pi));
    let mut keyed: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let favored = r.perturbation == pi && spec.confounder.class_of(r) == spec.favored_value;
            let w = if favored {
                spec.treated_weight
            } else {
                spec.control_weight
            };
            // log of u^(1/w); u in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<usize> = keyed.iter().take(spec.sample_size).map(|k| k.1).collect();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i]).collect())
}
