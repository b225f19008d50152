//! Forecasting systems under test.
//!
//! Built-in systems: an ARIMA baseline (`S_a`), a deliberately biased
//! oracle (`S_b`) and a uniform random guesser (`S_r`). External systems
//! exchange windows and predictions through line-delimited JSON files.

pub mod arima;
pub mod baselines;
pub mod exchange;

use serde::{Deserialize, Serialize};

use crate::data::{PerturbationId, WindowSample};
use crate::error::Result;

pub use arima::{fit_arima, forecast_arima, select_arima_order, ArimaForecaster, ArimaModel, OrderSelection};
pub use baselines::{biased_predict, random_predict, BiasedConfig, BiasedForecaster, RandomConfig, RandomForecaster};
pub use exchange::{export_windows_for_external, import_external_predictions, ManifestRecord};

pub const ARIMA_ID: &str = "S_a";
pub const BIASED_ID: &str = "S_b";
pub const RANDOM_ID: &str = "S_r";

/// One system's d-step prediction for a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub window_id: String,
    pub system_id: String,
    pub perturbation: PerturbationId,
    pub predictions: Vec<f64>,
}

pub trait Forecaster: Sync {
    fn system_id(&self) -> &str;

    /// Whether the system can consume inputs under `p`. Numeric-only
    /// systems cannot see image-space perturbations.
    fn applies_to(&self, p: PerturbationId) -> bool;

    fn predict(&self, window: &WindowSample) -> Result<ForecastRecord>;
}
