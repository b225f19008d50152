//! Extreme baselines: a biased oracle and a uniform random guesser.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EntityTable, PerturbationId, WindowSample};
use crate::error::{Error, Result};
use crate::forecast::{ForecastRecord, Forecaster, BIASED_ID, RANDOM_ID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasedConfig {
    /// Entity predicted exactly.
    pub favored_zero: String,
    /// Entity predicted with a small constant offset.
    pub favored_const: String,
    pub const_offset: f64,
    pub other_offset: f64,
}

impl BiasedConfig {
    pub fn new(favored_zero: impl Into<String>, favored_const: impl Into<String>) -> Self {
        Self {
            favored_zero: favored_zero.into(),
            favored_const: favored_const.into(),
            const_offset: 200.0,
            other_offset: 800.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.const_offset >= 0.0) || !(self.other_offset >= 0.0) {
            return Err(Error::Argument(format!(
                "biased offsets must be >= 0 (const={}, other={})",
                self.const_offset, self.other_offset
            )));
        }
        Ok(())
    }

    pub fn offset_for(&self, entity_id: &str) -> f64 {
        if entity_id == self.favored_zero {
            0.0
        } else if entity_id == self.favored_const {
            self.const_offset
        } else {
            self.other_offset
        }
    }
}

/// `S_b`: truth shifted by an entity-dependent offset.
pub fn biased_predict(window: &WindowSample, truth: &[f64], cfg: &BiasedConfig) -> ForecastRecord {
    let offset = cfg.offset_for(&window.entity_id);
    ForecastRecord {
        window_id: window.window_id.clone(),
        system_id: BIASED_ID.to_string(),
        perturbation: window.perturbation,
        predictions: truth.iter().map(|v| v + offset).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct BiasedForecaster {
    pub config: BiasedConfig,
}

impl Forecaster for BiasedForecaster {
    fn system_id(&self) -> &str {
        BIASED_ID
    }

    fn applies_to(&self, _p: PerturbationId) -> bool {
        true
    }

    fn predict(&self, window: &WindowSample) -> Result<ForecastRecord> {
        Ok(biased_predict(window, &window.truth, &self.config))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomConfig {
    pub margin: f64,
    pub seed: u64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { margin: 100.0, seed: 0 }
    }
}

/// FNV-1a, used to derive a stable per-window stream id.
fn stream_id(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Deterministic generator for `(seed, key)`, independent of call order.
pub(crate) fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(key));
    rng
}

/// `S_r`: i.i.d. uniform draws on `[min - margin, max + margin]`.
pub fn random_predict(window: &WindowSample, entity_min: f64, entity_max: f64, cfg: &RandomConfig) -> ForecastRecord {
    let lo = entity_min - cfg.margin;
    let hi = entity_max + cfg.margin;
    let mut rng = keyed_rng(cfg.seed, &window.window_id);
    let predictions = (0..window.truth.len())
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    ForecastRecord {
        window_id: window.window_id.clone(),
        system_id: RANDOM_ID.to_string(),
        perturbation: window.perturbation,
        predictions,
    }
}

#[derive(Debug, Clone)]
pub struct RandomForecaster {
    pub config: RandomConfig,
    ranges: BTreeMap<String, (f64, f64)>,
}

impl RandomForecaster {
    /// Ranges come from the unperturbed table.
    pub fn new(config: RandomConfig, clean: &EntityTable) -> Result<Self> {
        if !(config.margin >= 0.0) {
            return Err(Error::Argument(format!(
                "random margin must be >= 0, got {}",
                config.margin
            )));
        }
        let ranges = clean
            .entities
            .iter()
            .filter_map(|e| e.price_range().map(|r| (e.entity_id.clone(), r)))
            .collect();
        Ok(Self { config, ranges })
    }
}

impl Forecaster for RandomForecaster {
    fn system_id(&self) -> &str {
        RANDOM_ID
    }

    fn applies_to(&self, _p: PerturbationId) -> bool {
        true
    }

    fn predict(&self, window: &WindowSample) -> Result<ForecastRecord> {
        let (lo, hi) = self
            .ranges
            .get(&window.entity_id)
            .ok_or_else(|| Error::Argument(format!("no price range for entity {}", window.entity_id)))?;
        Ok(random_predict(window, *lo, *hi, &self.config))
    }
}
