//! Residual outcomes, accuracy metrics and rejection-based bias scores.

pub mod hypothesis;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{PerturbationId, WindowSample};
use crate::error::{Error, Result};
use crate::forecast::ForecastRecord;

pub use hypothesis::{
    all_pairs, company_pairs_within_industry, t_cdf, t_critical, welch_t, wrs, PairTest, TTestResult, WrsConfig,
    WrsOutcome,
};

/// How the per-window worst-case residual is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmaxMode {
    /// `max_h |pred_h - truth_h|`
    #[default]
    Absolute,
    /// `max_h (pred_h - truth_h)`
    Signed,
}

/// Per-window outcome for one system under one perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub window_id: String,
    pub system_id: String,
    pub perturbation: PerturbationId,
    pub entity_id: String,
    pub industry: String,
    pub residuals: Vec<f64>,
    pub r_max: f64,
    pub smape: f64,
    /// `None` when the input window is constant (zero naive error).
    pub mase: Option<f64>,
    pub sign_hit: bool,
}

/// `pred - truth` per horizon step and the worst-case magnitude.
pub fn residual_outcome(pred: &[f64], truth: &[f64], mode: RmaxMode) -> Result<(Vec<f64>, f64)> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Argument(format!(
            "prediction length {} vs truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    let residuals: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    let r_max = match mode {
        RmaxMode::Absolute => residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        RmaxMode::Signed => residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    Ok((residuals, r_max))
}

/// Symmetric MAPE in `[0, 2]`; terms with `|x| + |x_hat| == 0` count as 0.
pub fn smape(truth: &[f64], pred: &[f64]) -> f64 {
    debug_assert_eq!(truth.len(), pred.len());
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .zip(pred)
        .map(|(x, xh)| {
            let denom = (x.abs() + xh.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (x - xh).abs() / denom
            }
        })
        .sum();
    total / truth.len() as f64
}

/// Mean absolute error scaled by the in-sample naive one-step error of
/// `input`. The naive term sums the `t - 1` available lags and divides by
/// `t`.
pub fn mase(input: &[f64], truth: &[f64], pred: &[f64]) -> Result<f64> {
    if input.len() < 2 {
        return Err(Error::Metric("MASE needs at least two input values".into()));
    }
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Argument("MASE truth/prediction length mismatch".into()));
    }
    let naive = input.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / input.len() as f64;
    if naive == 0.0 {
        return Err(Error::Metric("MASE undefined for a constant input window".into()));
    }
    let mae = truth.iter().zip(pred).map(|(x, xh)| (x - xh).abs()).sum::<f64>() / truth.len() as f64;
    Ok(mae / naive)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn direction(x: f64) -> Ordering {
    x.partial_cmp(&0.0).unwrap_or(Ordering::Equal)
}

/// Whether forecast and truth move the same way relative to the last
/// observed input value (no-move is its own class).
pub fn sign_hit(last_input: f64, pred: &[f64], truth: &[f64]) -> bool {
    direction(mean(pred) - last_input) == direction(mean(truth) - last_input)
}

/// Fraction of records with a sign hit; `None` for an empty group.
pub fn sign_accuracy<'a>(records: impl IntoIterator<Item = &'a ResidualRecord>) -> Option<f64> {
    let (hits, n) = records
        .into_iter()
        .fold((0usize, 0usize), |(h, n), r| (h + r.sign_hit as usize, n + 1));
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Scores one forecast against its window.
pub fn residual_record(window: &WindowSample, forecast: &ForecastRecord, mode: RmaxMode) -> Result<ResidualRecord> {
    if window.window_id != forecast.window_id {
        return Err(Error::Argument(format!(
            "forecast for {} scored against window {}",
            forecast.window_id, window.window_id
        )));
    }
    let (residuals, r_max) = residual_outcome(&forecast.predictions, &window.truth, mode)?;
    Ok(ResidualRecord {
        window_id: window.window_id.clone(),
        system_id: forecast.system_id.clone(),
        perturbation: window.perturbation,
        entity_id: window.entity_id.clone(),
        industry: window.industry.clone(),
        residuals,
        r_max,
        smape: smape(&window.truth, &forecast.predictions),
        mase: mase(&window.input, &window.truth, &forecast.predictions).ok(),
        sign_hit: sign_hit(window.last_input(), &forecast.predictions, &window.truth),
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let m = mean(xs);
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some((m, sd))
}

/// Accuracy summary for one (system, perturbation) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub system_id: String,
    pub perturbation: PerturbationId,
    pub windows: usize,
    pub smape_mean: f64,
    pub smape_std: f64,
    pub mase_mean: Option<f64>,
    pub mase_std: Option<f64>,
    /// Windows excluded from MASE because of a constant input.
    pub mase_flagged: usize,
    /// Percentage in `[0, 100]`.
    pub sign_accuracy: f64,
}

/// Returns `None` for an empty group.
pub fn summarize_accuracy(records: &[&ResidualRecord]) -> Option<AccuracySummary> {
    let first = records.first()?;
    let smapes: Vec<f64> = records.iter().map(|r| r.smape).collect();
    let mases: Vec<f64> = records.iter().filter_map(|r| r.mase).collect();
    let (smape_mean, smape_std) = mean_std(&smapes)?;
    let mase = mean_std(&mases);
    Some(AccuracySummary {
        system_id: first.system_id.clone(),
        perturbation: first.perturbation,
        windows: records.len(),
        smape_mean,
        smape_std,
        mase_mean: mase.map(|m| m.0),
        mase_std: mase.map(|m| m.1),
        mase_flagged: records.len() - mases.len(),
        sign_accuracy: 100.0 * sign_accuracy(records.iter().copied())?,
    })
}
