//! Greedy 1:1 nearest-neighbour matching on propensity scores.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Bound;

use crate::error::{Error, Result};

/// A unit to be matched: its window id, confounder class and propensity.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit<'a> {
    pub id: &'a str,
    pub stratum: &'a str,
    pub propensity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// `(treated index, control index)` into the caller's slices.
    pub pairs: Vec<(usize, usize)>,
    /// Treated units left over once controls ran out.
    pub dropped_treated: usize,
}

fn check(units: &[Unit<'_>], side: &str) -> Result<()> {
    match units.iter().find(|u| !(0.0..=1.0).contains(&u.propensity)) {
        Some(u) => Err(Error::Matching(format!(
            "{side} unit {} has propensity {} outside [0, 1]",
            u.id, u.propensity
        ))),
        None => Ok(()),
    }
}

/// Controls sharing one propensity value, by stratum then id rank.
type Bucket<'a> = BTreeMap<&'a str, BTreeSet<usize>>;

/// Best control in a bucket for a treated unit of `stratum`: same stratum
/// first, then the smallest id rank.
fn best_in(bucket: &Bucket<'_>, stratum: &str) -> (bool, usize) {
    if let Some(set) = bucket.get(stratum) {
        return (false, *set.first().expect("buckets hold no empty sets"));
    }
    let rank = bucket
        .values()
        .map(|set| *set.first().expect("buckets hold no empty sets"))
        .min()
        .expect("pool holds no empty buckets");
    (true, rank)
}

/// Matches each treated unit, in ascending id order, to the nearest unused
/// control by `|p_t - p_c|`. Equal distances prefer a control from the same
/// stratum, then the smaller control id.
pub fn match_pairs(treated: &[Unit<'_>], control: &[Unit<'_>]) -> Result<Matching> {
    if control.is_empty() {
        return Err(Error::Matching("no control units".into()));
    }
    check(treated, "treated")?;
    check(control, "control")?;

    // controls ranked by id; propensity bits order like the values for p >= 0
    let mut by_id: Vec<usize> = (0..control.len()).collect();
    by_id.sort_by(|a, b| control[*a].id.cmp(control[*b].id));
    let mut pool: BTreeMap<u64, Bucket<'_>> = BTreeMap::new();
    for (rank, &ci) in by_id.iter().enumerate() {
        let c = &control[ci];
        pool.entry((c.propensity + 0.0).to_bits())
            .or_default()
            .entry(c.stratum)
            .or_default()
            .insert(rank);
    }

    let mut order: Vec<usize> = (0..treated.len()).collect();
    order.sort_by(|a, b| treated[*a].id.cmp(treated[*b].id));

    let mut out = Matching::default();
    for ti in order {
        let (p, stratum) = (treated[ti].propensity, treated[ti].stratum);
        let key = (p + 0.0).to_bits();
        let candidate = |(k, b): (&u64, &Bucket<'_>)| {
            let (mismatch, rank) = best_in(b, stratum);
            ((f64::from_bits(*k) - p).abs(), mismatch, rank, *k)
        };
        let below = pool.range(..=key).next_back().map(candidate);
        let above = pool
            .range((Bound::Excluded(key), Bound::Unbounded))
            .next()
            .map(candidate);
        let pick = match (below, above) {
            (None, None) => {
                out.dropped_treated += 1;
                continue;
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (Some(b), Some(a)) => {
                if (b.0, b.1, b.2) <= (a.0, a.1, a.2) {
                    b
                } else {
                    a
                }
            }
        };
        let (_, _, rank, k) = pick;
        let bucket = pool.get_mut(&k).expect("key present");
        let s = control[by_id[rank]].stratum;
        let set = bucket.get_mut(s).expect("stratum present");
        set.remove(&rank);
        if set.is_empty() {
            bucket.remove(s);
            if bucket.is_empty() {
                pool.remove(&k);
            }
        }
        out.pairs.push((ti, by_id[rank]));
    }
    Ok(out)
}
