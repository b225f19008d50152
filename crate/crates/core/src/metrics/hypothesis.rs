//! Welch t-tests and the Weighted Rejection Score (WRS).
//!
//! WRS counts, over pairs of sensitive-attribute classes and a set of
//! confidence levels, how often equality of mean worst-case residuals is
//! rejected, weighting each level.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-12;
const QUANTILE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub dof: f64,
    pub p_two_sided: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Student t CDF via the regularized incomplete beta function.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Welch's unequal-variance t-test. `eps` is added under the square root
/// so identical constant samples give `t = 0` rather than `NaN`.
pub fn welch_t(x1: &[f64], x2: &[f64], eps: f64) -> Result<TTestResult> {
    if x1.len() < 2 || x2.len() < 2 {
        return Err(Error::Argument(format!(
            "t-test needs at least 2 samples per group, got {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    let (m1, v1) = mean_var(x1);
    let (m2, v2) = mean_var(x2);
    let (n1, n2) = (x1.len() as f64, x2.len() as f64);
    let (a, b) = (v1 / n1, v2 / n2);
    let t = (m1 - m2) / (a + b + eps).sqrt();
    let dof = if a + b > 0.0 {
        (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0))
    } else {
        n1 + n2 - 2.0
    };
    let p = (2.0 * (1.0 - t_cdf(t.abs(), dof))).clamp(0.0, 1.0);
    Ok(TTestResult { t, dof, p_two_sided: p })
}

/// Two-sided critical value: the `1 - (1 - ci) / 2` quantile, found by
/// bisection on the CDF.
pub fn t_critical(ci: f64, dof: f64) -> f64 {
    let target = 1.0 - (1.0 - ci) / 2.0;
    let mut hi = 1.0;
    while t_cdf(hi, dof) < target && hi < 1e12 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, dof) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrsConfig {
    pub cis: Vec<f64>,
    pub weights: Vec<f64>,
    pub eps: f64,
}

impl Default for WrsConfig {
    fn default() -> Self {
        Self {
            cis: vec![0.95, 0.70, 0.60],
            weights: vec![1.0, 0.8, 0.6],
            eps: DEFAULT_EPS,
        }
    }
}

impl WrsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cis.len() != self.weights.len() || self.cis.is_empty() {
            return Err(Error::Argument(format!(
                "{} confidence levels but {} weights",
                self.cis.len(),
                self.weights.len()
            )));
        }
        if let Some(ci) = self.cis.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(Error::Argument(format!("confidence level {ci} outside (0, 1)")));
        }
        Ok(())
    }
}

/// One class pair's test and the levels at which it was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub class_a: String,
    pub class_b: String,
    pub test: TTestResult,
    pub rejected: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrsOutcome {
    pub score: f64,
    pub tests: Vec<PairTest>,
    /// Pairs skipped because a class had fewer than two samples.
    pub skipped: Vec<(String, String)>,
}

/// Weighted rejection score over `pairs` of classes in `groups`. A level
/// contributes its weight when `|t| >= t_critical(ci, dof)`.
pub fn wrs(groups: &BTreeMap<String, Vec<f64>>, pairs: &[(String, String)], cfg: &WrsConfig) -> Result<WrsOutcome> {
    cfg.validate()?;
    let mut out = WrsOutcome {
        score: 0.0,
        tests: Vec::new(),
        skipped: Vec::new(),
    };
    for (a, b) in pairs {
        let (Some(xa), Some(xb)) = (groups.get(a), groups.get(b)) else {
            log::warn!("WRS pair ({a}, {b}) skipped: class missing");
            out.skipped.push((a.clone(), b.clone()));
            continue;
        };
        let test = match welch_t(xa, xb, cfg.eps) {
            Ok(t) => t,
            Err(_) => {
                log::warn!("WRS pair ({a}, {b}) skipped: fewer than 2 samples");
                out.skipped.push((a.clone(), b.clone()));
                continue;
            }
        };
        let rejected: Vec<bool> = cfg
            .cis
            .iter()
            .map(|&ci| test.t.abs() >= t_critical(ci, test.dof))
            .collect();
        out.score += rejected
            .iter()
            .zip(&cfg.weights)
            .filter(|(r, _)| **r)
            .map(|(_, w)| w)
            .sum::<f64>();
        out.tests.push(PairTest {
            class_a: a.clone(),
            class_b: b.clone(),
            test,
            rejected,
        });
    }
    Ok(out)
}

/// Every unordered pair of distinct classes, in sorted order.
pub fn all_pairs<'a>(classes: impl IntoIterator<Item = &'a str>) -> Vec<(String, String)> {
    let mut cs: Vec<&str> = classes.into_iter().collect();
    cs.sort_unstable();
    cs.dedup();
    let mut out = Vec::new();
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            out.push((cs[i].to_string(), cs[j].to_string()));
        }
    }
    out
}

/// Pairs of entities sharing an industry (`entity -> industry`).
pub fn company_pairs_within_industry(industries: &BTreeMap<String, String>) -> Vec<(String, String)> {
    let mut by_industry: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (entity, ind) in industries {
        by_industry.entry(ind).or_default().push(entity);
    }
    by_industry.into_values().flat_map(all_pairs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Simpson integration of the t density from 0 to |t|.
    fn t_cdf_quadrature(t: f64, dof: f64) -> f64 {
        let ln_norm = statrs::function::gamma::ln_gamma((dof + 1.0) / 2.0)
            - statrs::function::gamma::ln_gamma(dof / 2.0)
            - 0.5 * (dof * std::f64::consts::PI).ln();
        let pdf = |x: f64| (ln_norm - (dof + 1.0) / 2.0 * (1.0 + x * x / dof).ln()).exp();
        let n = 20_000;
        let h = t.abs() / n as f64;
        let mut s = pdf(0.0) + pdf(t.abs());
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let half = s * h / 3.0;
        if t >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    #[test]
    fn cdf_matches_quadrature_grid() {
        for &dof in &[1.0, 2.0, 3.5, 4.0, 10.0, 30.0, 120.0] {
            for &t in &[-6.0, -2.5, -1.0, -0.3, 0.0, 0.4, 1.2, 2.0, 3.3, 8.0] {
                let a = t_cdf(t, dof);
                let b = t_cdf_quadrature(t, dof);
                assert!((a - b).abs() < 1e-7, "t={t} dof={dof}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn welch_hand_example() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], DEFAULT_EPS).unwrap();
        assert!((r.t - (-3.0 / (2.0f64 / 3.0).sqrt())).abs() < 1e-9);
        assert!((r.t + 3.6742).abs() < 1e-3);
        assert!((r.dof - 4.0).abs() < 1e-9);
        assert!(r.p_two_sided > 0.0 && r.p_two_sided < 0.05);

        let same = welch_t(&[1.0, 4.0, 2.0], &[1.0, 4.0, 2.0], DEFAULT_EPS).unwrap();
        assert_eq!(same.t, 0.0);
        assert!((same.p_two_sided - 1.0).abs() < 1e-12);

        assert!(welch_t(&[1.0], &[1.0, 2.0], DEFAULT_EPS).is_err());
    }

    #[test]
    fn p_value_tail_limit() {
        let r = welch_t(&[0.0, 1e-6, 2e-6], &[1e6, 1e6 + 1e-6, 1e6 + 2e-6], DEFAULT_EPS).unwrap();
        assert!(r.t.abs() > 1e9);
        assert!(r.p_two_sided < 1e-12);
    }

    #[test]
    fn critical_values() {
        assert!((t_critical(0.95, 4.0) - 2.776).abs() < 0.01);
        assert!((t_critical(0.95, 1e7) - 1.960).abs() < 0.01);
        assert!((t_critical(0.95, 1.0) - 12.706).abs() < 0.01);
        let levels = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
        for dof in [2.0, 7.0, 50.0] {
            let crit: Vec<f64> = levels.iter().map(|c| t_critical(*c, dof)).collect();
            assert!(crit.windows(2).all(|w| w[0] < w[1]));
        }
    }

    fn groups(entries: &[(&str, Vec<f64>)]) -> BTreeMap<String, Vec<f64>> {
        entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn wrs_extremes() {
        let base: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let g = groups(&[("A", base.clone()), ("B", base.clone()), ("C", base.clone())]);
        let pairs = all_pairs(["A", "B", "C"]);
        assert_eq!(pairs.len(), 3);
        assert_eq!(wrs(&g, &pairs, &WrsConfig::default()).unwrap().score, 0.0);

        let g = groups(&[
            ("A", base.clone()),
            ("B", base.iter().map(|v| v + 1000.0).collect()),
            ("C", base.iter().map(|v| v + 2000.0).collect()),
        ]);
        let out = wrs(&g, &pairs, &WrsConfig::default()).unwrap();
        assert!((out.score - 3.0 * (1.0 + 0.8 + 0.6)).abs() < 1e-12);

        let g2 = groups(&[("A", base.clone()), ("B", base.iter().map(|v| v + 500.0).collect())]);
        let out = wrs(&g2, &all_pairs(["A", "B"]), &WrsConfig::default()).unwrap();
        assert!((out.score - 2.4).abs() < 1e-12);
    }

    #[test]
    fn wrs_skips_thin_classes() {
        let g = groups(&[("A", vec![1.0, 2.0, 3.0]), ("B", vec![7.0])]);
        let out = wrs(&g, &all_pairs(["A", "B", "C"]), &WrsConfig::default()).unwrap();
        assert_eq!(out.score, 0.0);
        assert_eq!(out.skipped.len(), 3);
        let bad = WrsConfig {
            cis: vec![0.95],
            weights: vec![1.0, 0.5],
            eps: DEFAULT_EPS,
        };
        assert!(wrs(&g, &[], &bad).is_err());
    }

    #[test]
    fn within_industry_pairs() {
        let m: BTreeMap<String, String> = [
            ("META", "tech"),
            ("GOOG", "tech"),
            ("PFE", "pharma"),
            ("MRK", "pharma"),
            ("C", "bank"),
            ("WFC", "bank"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let pairs = company_pairs_within_industry(&m);
        assert_eq!(
            pairs,
            vec![
                ("C".to_string(), "WFC".to_string()),
                ("MRK".to_string(), "PFE".to_string()),
                ("GOOG".to_string(), "META".to_string()),
            ]
        );
    }

    proptest! {
        #[test]
        fn welch_antisymmetric_and_shift_invariant(
            a in prop::collection::vec(-100.0f64..100.0, 2..30),
            b in prop::collection::vec(-100.0f64..100.0, 2..30),
            shift in -50.0f64..50.0,
        ) {
            let ab = welch_t(&a, &b, DEFAULT_EPS).unwrap();
            let ba = welch_t(&b, &a, DEFAULT_EPS).unwrap();
            prop_assert!((ab.t + ba.t).abs() <= 1e-12 * ab.t.abs().max(1.0));
            let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let shifted = welch_t(&sa, &sb, DEFAULT_EPS).unwrap();
            prop_assert!((shifted.t - ab.t).abs() <= 1e-8 * ab.t.abs().max(1.0));
            prop_assert!(ab.dof > 0.0);
            prop_assert!((0.0..=1.0).contains(&ab.p_two_sided));
        }

        #[test]
        fn wrs_monotone_in_separation(
            base in prop::collection::vec(-1.0f64..1.0, 5..25),
            other in prop::collection::vec(-1.0f64..1.0, 5..25),
            d1 in 0.0f64..3.0,
            extra in 0.0f64..3.0,
        ) {
            let pairs = all_pairs(["A", "B"]);
            let score = |d: f64| {
                let g = groups(&[("A", base.clone()), ("B", other.iter().map(|v| v + d).collect())]);
                wrs(&g, &pairs, &WrsConfig::default()).unwrap().score
            };
            let m_a = base.iter().sum::<f64>() / base.len() as f64;
            let m_b = other.iter().sum::<f64>() / other.len() as f64;
            // move B further away from A in the direction it already lies
            let (lo, hi) = if m_b >= m_a { (d1, d1 + extra) } else { (-d1, -d1 - extra) };
            prop_assert!(score(hi) >= score(lo));
        }
    }
}
