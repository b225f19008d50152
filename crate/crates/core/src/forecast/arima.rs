//! ARIMA(p, 1, q) by Hannan–Rissanen two-stage least squares.
//!
//! Stage one fits a long autoregression to the differenced series to
//! estimate the innovations. Stage two regresses each difference on an
//! intercept, `p` lagged differences and `q` lagged innovation estimates.

use serde::{Deserialize, Serialize};

use crate::data::{PerturbationId, WindowSample};
use crate::error::{Error, Result};
use crate::forecast::{ForecastRecord, Forecaster, ARIMA_ID};
use crate::linalg::least_squares;

pub const MAX_ORDER: usize = 5;
const LONG_AR_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d_order: usize,
    pub q: usize,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    /// Differenced training series.
    pub diffs: Vec<f64>,
    /// Innovation estimates aligned with `diffs`.
    pub residuals: Vec<f64>,
    /// Rows used in the stage-two regression.
    pub n_obs: usize,
}

impl ArimaModel {
    /// ARIMA(0,1,0) with drift `intercept`.
    pub fn random_walk(train: &[f64], intercept: f64) -> Self {
        let diffs = difference(train);
        Self {
            p: 0,
            d_order: 1,
            q: 0,
            phi: Vec::new(),
            theta: Vec::new(),
            intercept,
            sigma2: 0.0,
            residuals: vec![0.0; diffs.len()],
            n_obs: diffs.len(),
            diffs,
        }
    }

    /// Whether every root of `1 - phi_1 z - ... - phi_p z^p` lies outside
    /// the unit circle, i.e. the companion matrix has spectral radius < 1.
    pub fn is_stationary(&self) -> bool {
        let p = self.phi.len();
        if p == 0 {
            return true;
        }
        let companion = nalgebra::DMatrix::from_fn(p, p, |i, j| {
            if i == 0 {
                self.phi[j]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        companion.complex_eigenvalues().iter().all(|z| z.norm() < 1.0)
    }

    /// Akaike criterion `n * ln(sigma2) + 2 (p + q + 1)`.
    pub fn aic(&self) -> f64 {
        self.n_obs as f64 * self.sigma2.ln() + 2.0 * (self.p + self.q + 1) as f64
    }
}

fn difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn long_ar_order(n_diffs: usize) -> usize {
    LONG_AR_CAP.min(n_diffs / 4).max(1)
}

/// Stage one: innovations from a long AR fit; zero where unavailable.
fn long_ar_innovations(w: &[f64], m: usize, p: usize, q: usize) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (m..w.len())
        .map(|t| {
            let mut r = Vec::with_capacity(m + 1);
            r.push(1.0);
            r.extend((1..=m).map(|i| w[t - i]));
            r
        })
        .collect();
    let fit = least_squares(&rows, &w[m..]).ok_or_else(|| Error::ArimaFit {
        p,
        q,
        reason: format!("long autoregression of order {m} is singular"),
    })?;
    let mut e = vec![0.0; m];
    e.extend(fit.residuals);
    Ok(e)
}

fn check_fit_args(n: usize, p: usize, q: usize) -> Result<()> {
    if p > MAX_ORDER || q > MAX_ORDER {
        return Err(Error::Argument(format!(
            "ARIMA orders are capped at {MAX_ORDER}, got p={p}, q={q}"
        )));
    }
    let need = 30.max(3 * (p + q) + 10);
    if n < need {
        return Err(Error::Argument(format!(
            "ARIMA({p},1,{q}) needs at least {need} observations, got {n}"
        )));
    }
    Ok(())
}

/// Fits ARIMA(p, 1, q).
pub fn fit_arima(train: &[f64], p: usize, q: usize) -> Result<ArimaModel> {
    check_fit_args(train.len(), p, q)?;
    let w = difference(train);
    let innovations = if q > 0 {
        Some(long_ar_innovations(&w, long_ar_order(w.len()), p, q)?)
    } else {
        None
    };
    let start = if q > 0 { long_ar_order(w.len()) } else { 0 } + p.max(q);
    fit_stage_two(w, innovations, p, q, start)
}

fn fit_stage_two(w: Vec<f64>, innovations: Option<Vec<f64>>, p: usize, q: usize, start: usize) -> Result<ArimaModel> {
    let cols = 1 + p + q;
    if w.len() < start + cols + 1 {
        return Err(Error::ArimaFit {
            p,
            q,
            reason: format!(
                "only {} usable rows for {cols} coefficients",
                w.len().saturating_sub(start)
            ),
        });
    }
    let e = innovations.unwrap_or_else(|| vec![0.0; w.len()]);
    let rows: Vec<Vec<f64>> = (start..w.len())
        .map(|t| {
            let mut r = Vec::with_capacity(cols);
            r.push(1.0);
            r.extend((1..=p).map(|i| w[t - i]));
            r.extend((1..=q).map(|j| e[t - j]));
            r
        })
        .collect();
    let fit = least_squares(&rows, &w[start..]).ok_or_else(|| Error::ArimaFit {
        p,
        q,
        reason: "singular regression matrix".into(),
    })?;
    let n_obs = rows.len();
    let sigma2 = fit.residuals.iter().map(|r| r * r).sum::<f64>() / n_obs as f64;
    let mut residuals = e;
    residuals[start..].copy_from_slice(&fit.residuals);
    Ok(ArimaModel {
        p,
        d_order: 1,
        q,
        intercept: fit.coef[0],
        phi: fit.coef[1..=p].to_vec(),
        theta: fit.coef[1 + p..].to_vec(),
        sigma2,
        diffs: w,
        residuals,
        n_obs,
    })
}

/// Recursive h-step forecast of the differences (future innovations set to
/// zero), integrated from `last_level`.
pub fn forecast_arima(model: &ArimaModel, last_level: f64, horizon: usize) -> Vec<f64> {
    let mut w = model.diffs.clone();
    let mut e = model.residuals.clone();
    let mut level = last_level;
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let n = w.len();
        let ar: f64 = model
            .phi
            .iter()
            .enumerate()
            .map(|(i, phi)| phi * n.checked_sub(i + 1).map_or(0.0, |k| w[k]))
            .sum();
        let ma: f64 = model
            .theta
            .iter()
            .enumerate()
            .map(|(j, th)| th * n.checked_sub(j + 1).map_or(0.0, |k| e[k]))
            .sum();
        let next = model.intercept + ar + ma;
        w.push(next);
        e.push(0.0);
        level += next;
        out.push(level);
    }
    out
}

/// Outcome of the AIC grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderSelection {
    pub p: usize,
    pub q: usize,
    /// Every candidate failed and (1, 1) was returned by default.
    pub fallback: bool,
}

/// Grid search over `0..=p_max` x `0..=q_max` minimising AIC.
///
/// All candidates are scored on the same regression rows so their AIC
/// values are comparable. Ties go to the smaller `p + q`, then smaller `p`.
pub fn select_arima_order(train: &[f64], p_max: usize, q_max: usize) -> Result<OrderSelection> {
    check_fit_args(train.len(), p_max, q_max)?;
    let w = difference(train);
    let m = long_ar_order(w.len());
    let innovations = if q_max > 0 {
        long_ar_innovations(&w, m, p_max, q_max).ok()
    } else {
        None
    };
    let start = if innovations.is_some() { m } else { 0 } + p_max.max(q_max);

    let mut best: Option<(f64, usize, usize)> = None;
    for p in 0..=p_max {
        for q in 0..=q_max {
            if q > 0 && innovations.is_none() {
                continue;
            }
            let inn = if q > 0 { innovations.clone() } else { None };
            let Ok(model) = fit_stage_two(w.clone(), inn, p, q, start) else {
                continue;
            };
            let aic = model.aic();
            if aic.is_nan() || !model.is_stationary() {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bp, bq)) => aic < b || (aic == b && (p + q, p) < (bp + bq, bp)),
            };
            if better {
                best = Some((aic, p, q));
            }
        }
    }
    Ok(match best {
        Some((_, p, q)) => OrderSelection { p, q, fallback: false },
        None => {
            log::warn!("no ARIMA order could be fitted; falling back to (1, 1)");
            OrderSelection {
                p: 1,
                q: 1,
                fallback: true,
            }
        }
    })
}

/// `S_a`: per-window order selection, fit and forecast.
#[derive(Debug, Clone)]
pub struct ArimaForecaster {
    pub p_max: usize,
    pub q_max: usize,
    pub horizon: usize,
}

impl ArimaForecaster {
    pub fn new(p_max: usize, q_max: usize, horizon: usize) -> Self {
        Self { p_max, q_max, horizon }
    }

    /// Forecast for one input window. Falls back to naive persistence when
    /// no model can be fitted or the fitted recursion diverges.
    pub fn forecast_input(&self, input: &[f64]) -> Result<Vec<f64>> {
        let last = *input
            .last()
            .ok_or_else(|| Error::Argument("empty input window".into()))?;
        let model = select_arima_order(input, self.p_max, self.q_max).and_then(|sel| fit_arima(input, sel.p, sel.q));
        let preds = match model {
            Ok(m) if !m.is_stationary() => {
                log::debug!("ARIMA({}, 1, {}) fit is explosive; using persistence", m.p, m.q);
                vec![last; self.horizon]
            }
            Ok(m) => forecast_arima(&m, last, self.horizon),
            Err(e) => {
                log::debug!("ARIMA fit failed ({e}); using persistence");
                vec![last; self.horizon]
            }
        };
        if preds.iter().all(|v| v.is_finite()) {
            Ok(preds)
        } else {
            Ok(vec![last; self.horizon])
        }
    }
}

impl Forecaster for ArimaForecaster {
    fn system_id(&self) -> &str {
        ARIMA_ID
    }

    fn applies_to(&self, p: PerturbationId) -> bool {
        !p.is_image_only()
    }

    fn predict(&self, window: &WindowSample) -> Result<ForecastRecord> {
        Ok(ForecastRecord {
            window_id: window.window_id.clone(),
            system_id: ARIMA_ID.to_string(),
            perturbation: window.perturbation,
            predictions: self.forecast_input(&window.input)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Levels whose first differences follow AR(1) with coefficient `phi`.
    fn simulate_ar1_levels(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level = 100.0;
        let mut prev = 0.0;
        let mut out = vec![level];
        for _ in 1..n {
            let eps: f64 = StandardNormal.sample(&mut rng);
            prev = phi * prev + eps;
            level += prev;
            out.push(level);
        }
        out
    }

    fn simulate_white_noise_levels(n: usize, seed: u64) -> Vec<f64> {
        simulate_ar1_levels(0.0, n, seed)
    }

    #[test]
    fn recovers_ar1_coefficient() {
        let x = simulate_ar1_levels(0.6, 2000, 7);
        let m = fit_arima(&x, 1, 0).unwrap();
        assert!((0.55..=0.65).contains(&m.phi[0]), "phi = {}", m.phi[0]);
        assert_eq!(m.d_order, 1);
    }

    #[test]
    fn white_noise_has_no_drift() {
        let x = simulate_white_noise_levels(2000, 11);
        let m = fit_arima(&x, 0, 0).unwrap();
        assert!(m.intercept.abs() < 0.1, "intercept = {}", m.intercept);
        let f = forecast_arima(&m, 10.0, 5);
        for (h, v) in f.iter().enumerate() {
            assert!((v - (10.0 + (h + 1) as f64 * m.intercept)).abs() < 1e-12);
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let x = simulate_ar1_levels(0.3, 200, 3);
        assert_eq!(fit_arima(&x, 2, 1).unwrap(), fit_arima(&x, 2, 1).unwrap());
    }

    #[test]
    fn drift_closed_form() {
        let train: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let flat = ArimaModel::random_walk(&train, 0.0);
        assert_eq!(forecast_arima(&flat, 42.0, 4), vec![42.0; 4]);
        let drift = ArimaModel::random_walk(&train, 0.5);
        assert_eq!(forecast_arima(&drift, 10.0, 3), vec![10.5, 11.0, 11.5]);
    }

    #[test]
    fn ar1_forecast_decays_geometrically() {
        let mut m = ArimaModel::random_walk(&[0.0, 2.0], 0.0);
        m.p = 1;
        m.phi = vec![0.5];
        let f = forecast_arima(&m, 2.0, 6);
        let mut prev_level = 2.0;
        let diffs: Vec<f64> = f
            .iter()
            .map(|v| {
                let d = v - prev_level;
                prev_level = *v;
                d
            })
            .collect();
        for h in 0..diffs.len() {
            assert!((diffs[h] - 0.5f64.powi(h as i32) * diffs[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn stationarity_check() {
        let mut m = ArimaModel::random_walk(&[1.0, 2.0, 3.0], 0.0);
        assert!(m.is_stationary());
        m.phi = vec![0.6];
        assert!(m.is_stationary());
        m.phi = vec![1.2];
        assert!(!m.is_stationary());
        // 1 - 0.5z - 0.6z^2 has a root inside the unit circle
        m.phi = vec![0.5, 0.6];
        assert!(!m.is_stationary());
        m.phi = vec![0.5, -0.3];
        assert!(m.is_stationary());
    }

    #[test]
    fn spike_at_window_end_does_not_explode() {
        let mut input: Vec<f64> = (0..80).map(|i| 100.0 + (i as f64 * 0.37).sin()).collect();
        input[79] = 0.0;
        let f = ArimaForecaster::new(3, 3, 20).forecast_input(&input).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e3), "{f:?}");
    }

    #[test]
    fn errors() {
        let short: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(fit_arima(&short, 1, 0), Err(Error::Argument(_))));
        let x = simulate_ar1_levels(0.3, 200, 3);
        assert!(matches!(fit_arima(&x, 6, 0), Err(Error::Argument(_))));
        // constant series: lagged differences are all zero
        let flat = vec![5.0; 80];
        assert!(matches!(
            fit_arima(&flat, 1, 0),
            Err(Error::ArimaFit { p: 1, q: 0, .. })
        ));
    }

    #[test]
    fn selects_ar_structure() {
        // AR(2) in the differences
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut d1, mut d2, mut level) = (0.0, 0.0, 0.0);
        let mut x = vec![level];
        for _ in 0..600 {
            let eps: f64 = StandardNormal.sample(&mut rng);
            let d = 0.5 * d1 + 0.3 * d2 + eps;
            d2 = d1;
            d1 = d;
            level += d;
            x.push(level);
        }
        let sel = select_arima_order(&x, 3, 3).unwrap();
        assert!(sel.p >= 1, "{sel:?}");
    }

    #[test]
    fn selects_zero_order_for_white_noise() {
        let hits = (0..10)
            .filter(|seed| {
                let x = simulate_white_noise_levels(400, 100 + seed);
                let sel = select_arima_order(&x, 3, 3).unwrap();
                (sel.p, sel.q) == (0, 0)
            })
            .count();
        // AIC overfits occasionally; the penalty should win most of the time
        assert!(hits >= 6, "only {hits}/10 white-noise series selected (0,0)");
    }

    #[test]
    fn tie_prefers_smaller_order() {
        // exact linear trend: every order fits perfectly (sigma2 = 0, AIC = -inf)
        // or fails; the tie rule must return the smallest
        let x: Vec<f64> = (0..80).map(|i| 3.0 + 0.25 * i as f64).collect();
        let sel = select_arima_order(&x, 3, 3).unwrap();
        assert_eq!((sel.p, sel.q), (0, 0));
    }

    #[test]
    fn level_shift_invariance() {
        let x = simulate_ar1_levels(0.4, 80, 21);
        let shifted: Vec<f64> = x.iter().map(|v| v + 250.0).collect();
        let f = ArimaForecaster::new(2, 2, 20);
        let a = f.forecast_input(&x).unwrap();
        let b = f.forecast_input(&shifted).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((v - u - 250.0).abs() < 1e-6, "{u} vs {v}");
        }
    }
}
