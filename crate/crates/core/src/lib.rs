//! Robustness rating of time-series forecasters under input perturbations.
//!
//! Price series are cut into sliding windows, perturbed numerically or as
//! spectrogram images, forecast by the systems under test, and scored by
//! statistical bias (WRS) and causal impact (APE, PIE%). Scores are turned
//! into discrete ratings per perturbation.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod causal;
pub mod data;
pub mod error;
pub mod forecast;
pub mod image;
mod linalg;
pub mod metrics;
pub mod perturb;
pub mod rating;
pub mod specgram;

pub use causal::{analyze, ape, pie_percent, CausalResult, CausalSummary, Confounder, DistributionSpec};
pub use data::{
    load_price_table, make_windows, standardize, EntitySeries, EntityTable, PerturbationId, WindowSample, WindowSet,
};
pub use error::{Error, Result};
pub use forecast::{ForecastRecord, Forecaster};
pub use image::SpectroImage;
pub use metrics::{ResidualRecord, TTestResult, WrsConfig};
pub use rating::{assign_rating, RatingTable};
