//! Causal impact of perturbations: confounded sampling, propensity
//! matching, and the APE / PIE% scores.
//!
//! Each perturbation `Pi` is treated pairwise against the `P0` control.
//! The outcome is the per-window worst-case residual `r_max`.

pub mod logistic;
pub mod matching;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::data::PerturbationId;
use crate::error::{Error, Result};
use crate::metrics::ResidualRecord;

pub use logistic::{fit_logistic, PropensityModel};
pub use matching::{match_pairs, Matching, Unit};
pub use sampling::{build_distribution, default_specs, Confounder, DistributionSpec};

/// Absolute difference of group means.
pub fn ape(treated: &[f64], control: &[f64]) -> Result<f64> {
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Argument("APE needs non-empty treated and control groups".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(treated) - mean(control)).abs())
}

/// `| |ape_o| - |ape_m| | * 100`.
pub fn pie_percent(ape_o: f64, ape_m: f64) -> f64 {
    (ape_o.abs() - ape_m.abs()).abs() * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalResult {
    pub system_id: String,
    pub perturbation: PerturbationId,
    pub confounder: Confounder,
    pub distribution: String,
    pub ape_o: f64,
    pub ape_m: f64,
    pub pie_percent: f64,
    pub matched_pairs: usize,
    pub dropped_treated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFailure {
    pub distribution: String,
    pub reason: String,
}

/// Per-distribution results and worst-case aggregates for one
/// `(system, Pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalSummary {
    pub system_id: String,
    pub perturbation: PerturbationId,
    pub results: Vec<CausalResult>,
    pub failures: Vec<SpecFailure>,
}

impl CausalSummary {
    fn max_by(&self, confounder: Option<Confounder>, f: impl Fn(&CausalResult) -> f64) -> Option<f64> {
        self.results
            .iter()
            .filter(|r| confounder.is_none_or(|c| r.confounder == c))
            .map(f)
            .reduce(f64::max)
    }

    /// MAX of PIE% over successful distributions, optionally restricted to
    /// one confounder.
    pub fn max_pie(&self, confounder: Option<Confounder>) -> Option<f64> {
        self.max_by(confounder, |r| r.pie_percent)
    }

    /// MAX of the matched APE.
    pub fn max_ape(&self, confounder: Option<Confounder>) -> Option<f64> {
        self.max_by(confounder, |r| r.ape_m)
    }
}

/// Runs one distribution: sample, observational APE, propensity fit on the
/// confounder one-hot, matching, matched APE and PIE%.
pub fn analyze_spec(
    records: &[&ResidualRecord],
    system_id: &str,
    pi: PerturbationId,
    spec: &DistributionSpec,
) -> Result<CausalResult> {
    let own: Vec<&ResidualRecord> = records.iter().copied().filter(|r| r.system_id == system_id).collect();
    let sample = build_distribution(&own, pi, spec)?;
    let treated: Vec<&ResidualRecord> = sample.iter().copied().filter(|r| r.perturbation == pi).collect();
    let control: Vec<&ResidualRecord> = sample.iter().copied().filter(|r| r.perturbation != pi).collect();
    let outcomes = |v: &[&ResidualRecord]| v.iter().map(|r| r.r_max).collect::<Vec<f64>>();
    if treated.is_empty() || control.is_empty() {
        return Err(Error::Sampling(format!(
            "{}: sample has {} treated and {} control rows",
            spec.tag,
            treated.len(),
            control.len()
        )));
    }
    let ape_o = ape(&outcomes(&treated), &outcomes(&control))?;

    let z: Vec<&str> = sample.iter().map(|r| spec.confounder.class_of(r)).collect();
    let labels: Vec<bool> = sample.iter().map(|r| r.perturbation == pi).collect();
    let model = PropensityModel::fit(&z, &labels)?;
    fn to_units<'a>(v: &[&'a ResidualRecord], model: &PropensityModel, c: Confounder) -> Vec<Unit<'a>> {
        v.iter()
            .map(|r| Unit {
                id: &r.window_id,
                stratum: c.class_of(r),
                propensity: model.propensity(c.class_of(r)),
            })
            .collect()
    }
    let tu = to_units(&treated, &model, spec.confounder);
    let cu = to_units(&control, &model, spec.confounder);
    let m = match_pairs(&tu, &cu)?;
    if m.pairs.is_empty() {
        return Err(Error::Matching(format!("{}: no matched pairs", spec.tag)));
    }
    if m.dropped_treated > 0 {
        log::info!("{}: {} treated windows left unmatched", spec.tag, m.dropped_treated);
    }
    let mt: Vec<f64> = m.pairs.iter().map(|(t, _)| treated[*t].r_max).collect();
    let mc: Vec<f64> = m.pairs.iter().map(|(_, c)| control[*c].r_max).collect();
    let ape_m = ape(&mt, &mc)?;
    Ok(CausalResult {
        system_id: system_id.to_string(),
        perturbation: pi,
        confounder: spec.confounder,
        distribution: spec.tag.clone(),
        ape_o,
        ape_m,
        pie_percent: pie_percent(ape_o, ape_m),
        matched_pairs: m.pairs.len(),
        dropped_treated: m.dropped_treated,
    })
}

/// Runs every distribution; failures are logged and excluded from the
/// aggregates.
pub fn analyze(
    records: &[&ResidualRecord],
    system_id: &str,
    pi: PerturbationId,
    specs: &[DistributionSpec],
) -> CausalSummary {
    let mut summary = CausalSummary {
        system_id: system_id.to_string(),
        perturbation: pi,
        results: Vec::new(),
        failures: Vec::new(),
    };
    for spec in specs {
        match analyze_spec(records, system_id, pi, spec) {
            Ok(r) => summary.results.push(r),
            Err(e) => {
                log::warn!("{system_id} {pi} {}: excluded ({e})", spec.tag);
                summary.failures.push(SpecFailure {
                    distribution: spec.tag.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    summary
}
