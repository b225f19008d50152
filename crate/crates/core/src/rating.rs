//! Raw scores to ratings: a partial order by score, then contiguous
//! near-equal buckets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::PerturbationId;
use crate::error::{Error, Result};

pub const DEFAULT_LEVELS: usize = 3;

/// Systems sorted ascending by score, ties by system id.
pub fn create_partial_order(scores: &BTreeMap<String, f64>) -> Result<Vec<(String, f64)>> {
    if scores.is_empty() {
        return Err(Error::Argument("no systems to order".into()));
    }
    if let Some((s, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Argument(format!("non-finite score {v} for system {s}")));
    }
    let mut order: Vec<(String, f64)> = scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(order)
}

/// Splits into `levels` contiguous groups; the first `len % levels` groups
/// take one extra item.
pub fn array_split<T: Clone>(items: &[T], levels: usize) -> Vec<Vec<T>> {
    let levels = levels.max(1);
    let (base, extra) = (items.len() / levels, items.len() % levels);
    let mut out = Vec::with_capacity(levels);
    let mut start = 0;
    for g in 0..levels {
        let size = base + usize::from(g < extra);
        out.push(items[start..start + size].to_vec());
        start += size;
    }
    out
}

/// Rating in `1..=levels` per system. A lone system gets 1 when its score
/// is zero and `levels` otherwise.
pub fn assign_rating(scores: &BTreeMap<String, f64>, levels: usize) -> Result<BTreeMap<String, usize>> {
    if levels == 0 {
        return Err(Error::Argument("rating levels must be at least 1".into()));
    }
    let order = create_partial_order(scores)?;
    if order.len() == 1 {
        let (s, v) = &order[0];
        return Ok([(s.clone(), if *v == 0.0 { 1 } else { levels })].into());
    }
    Ok(array_split(&order, levels)
        .into_iter()
        .enumerate()
        .flat_map(|(g, group)| group.into_iter().map(move |(s, _)| (s, g + 1)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub perturbation: PerturbationId,
    pub partial_order: Vec<(String, f64)>,
    pub ratings: BTreeMap<String, usize>,
}

/// Ratings of one metric across perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    pub metric_id: String,
    pub levels: usize,
    pub rows: Vec<RatingRow>,
}

impl RatingTable {
    pub fn build(
        metric_id: &str,
        levels: usize,
        scores: &BTreeMap<PerturbationId, BTreeMap<String, f64>>,
    ) -> Result<Self> {
        let rows = scores
            .iter()
            .map(|(p, s)| {
                Ok(RatingRow {
                    perturbation: *p,
                    partial_order: create_partial_order(s)?,
                    ratings: assign_rating(s, levels)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            metric_id: metric_id.to_string(),
            levels,
            rows,
        })
    }
}
