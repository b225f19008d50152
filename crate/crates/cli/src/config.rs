//! Run configuration: TOML on disk, defaults for everything but the data
//! paths, and a schema check before any stage starts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsrate_core::causal::Confounder;
use tsrate_core::data::PerturbationId;
use tsrate_core::forecast::arima::MAX_ORDER;
use tsrate_core::forecast::{ARIMA_ID, BIASED_ID, RANDOM_ID};
use tsrate_core::metrics::RmaxMode;
use tsrate_core::perturb::{DEFAULT_PERIOD, DEFAULT_SATURATION_FACTOR, DEFAULT_SENTIMENT_THRESHOLD};
use tsrate_core::specgram::DEFAULT_OMEGA0;

use crate::Invalid;

pub const BUILTIN_SYSTEMS: [&str; 3] = [ARIMA_ID, BIASED_ID, RANDOM_ID];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub perturbations: Vec<PerturbationId>,
    pub systems: Vec<String>,
    pub data: DataConfig,
    pub windows: WindowConfig,
    pub perturb: PerturbConfig,
    pub sentiment: SentimentConfig,
    pub arima: ArimaConfig,
    pub biased: BiasedSection,
    pub random: RandomSection,
    pub metrics: MetricsConfig,
    pub causal: CausalConfig,
    pub rating: RatingConfig,
    pub external: Vec<ExternalSystem>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            perturbations: PerturbationId::ALL.to_vec(),
            systems: BUILTIN_SYSTEMS.iter().map(|s| s.to_string()).collect(),
            data: DataConfig::default(),
            windows: WindowConfig::default(),
            perturb: PerturbConfig::default(),
            sentiment: SentimentConfig::default(),
            arima: ArimaConfig::default(),
            biased: BiasedSection::default(),
            random: RandomSection::default(),
            metrics: MetricsConfig::default(),
            causal: CausalConfig::default(),
            rating: RatingConfig::default(),
            external: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub prices: PathBuf,
    pub metadata: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub n: usize,
    pub d: usize,
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            n: 80,
            d: 20,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub period: usize,
    pub saturation_factor: f64,
    pub omega0: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            period: DEFAULT_PERIOD,
            saturation_factor: DEFAULT_SATURATION_FACTOR,
            omega0: DEFAULT_OMEGA0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentSource {
    #[default]
    Heuristic,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentimentConfig {
    pub provider: SentimentSource,
    pub threshold: f64,
    /// Line-delimited `{"window_id", "label"}` keyed by P5 window ids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            provider: SentimentSource::Heuristic,
            threshold: DEFAULT_SENTIMENT_THRESHOLD,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaConfig {
    pub p_max: usize,
    pub q_max: usize,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self { p_max: 3, q_max: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasedSection {
    /// Defaults to the first entity in sorted order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub favored_zero: Option<String>,
    /// Defaults to the second entity in sorted order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub favored_const: Option<String>,
    pub const_offset: f64,
    pub other_offset: f64,
}

impl Default for BiasedSection {
    fn default() -> Self {
        Self {
            favored_zero: None,
            favored_const: None,
            const_offset: 200.0,
            other_offset: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomSection {
    pub margin: f64,
    /// Falls back to the top-level seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for RandomSection {
    fn default() -> Self {
        Self {
            margin: 100.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub rmax_mode: RmaxMode,
    pub cis: Vec<f64>,
    pub weights: Vec<f64>,
    pub eps: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        let w = tsrate_core::metrics::WrsConfig::default();
        Self {
            rmax_mode: RmaxMode::Absolute,
            cis: w.cis,
            weights: w.weights,
            eps: w.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionOverride {
    pub tag: String,
    pub confounder: Confounder,
    pub favored_value: String,
    #[serde(default = "two")]
    pub treated_weight: f64,
    #[serde(default = "one")]
    pub control_weight: f64,
}

fn two() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalConfig {
    /// Sample size as a fraction of the `{Pi, P0}` pool.
    pub sample_fraction: f64,
    pub include_uniform: bool,
    pub treated_weight: f64,
    pub control_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Replaces the default one-per-class family when non-empty.
    pub distributions: Vec<DistributionOverride>,
}

impl Default for CausalConfig {
    fn default() -> Self {
        Self {
            sample_fraction: 0.5,
            include_uniform: false,
            treated_weight: 2.0,
            control_weight: 1.0,
            seed: None,
            distributions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub levels: usize,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

/// Predictions produced outside this tool, in the exchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSystem {
    pub system_id: String,
    pub predictions: PathBuf,
}

impl RunConfig {
    /// Reads and checks a config; relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Invalid(format!("config {}: {e}", path.display())))?;
        let base = std::path::absolute(
            path.parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new(".")),
        )
        .map_err(|e| Invalid(format!("config {}: {e}", path.display())))?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.as_os_str().is_empty() || p.is_absolute() {
                return;
            }
            *p = base.join(&*p);
        };
        fix(&mut self.data.prices);
        fix(&mut self.data.metadata);
        if let Some(ws) = self.data.workspace.as_mut() {
            fix(ws);
        }
        if let Some(p) = self.sentiment.path.as_mut() {
            fix(p);
        }
        for e in &mut self.external {
            fix(&mut e.predictions);
        }
    }

    /// Fills optional seeds so `run.lock` records every seed in use.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.random.seed.get_or_insert(self.seed);
        c.causal.seed.get_or_insert(self.seed);
        c
    }

    pub fn random_seed(&self) -> u64 {
        self.random.seed.unwrap_or(self.seed)
    }

    pub fn causal_seed(&self) -> u64 {
        self.causal.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        let bad = |m: String| Err(Invalid(m));
        if self.data.prices.as_os_str().is_empty() {
            return bad("data.prices is required".into());
        }
        if self.data.metadata.as_os_str().is_empty() {
            return bad("data.metadata is required".into());
        }
        let w = &self.windows;
        if w.n < 2 || w.d < 1 || w.stride < 1 {
            return bad(format!(
                "windows: need n >= 2, d >= 1, stride >= 1 (got {}, {}, {})",
                w.n, w.d, w.stride
            ));
        }
        let perts: BTreeSet<_> = self.perturbations.iter().collect();
        if perts.len() != self.perturbations.len() {
            return bad("perturbations: duplicate entries".into());
        }
        if !perts.contains(&PerturbationId::P0) {
            return bad("perturbations: P0 (control) is required".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.systems {
            if !BUILTIN_SYSTEMS.contains(&s.as_str()) {
                return bad(format!(
                    "systems: unknown built-in system {s} (expected one of {BUILTIN_SYSTEMS:?})"
                ));
            }
            if !ids.insert(s.as_str()) {
                return bad(format!("systems: {s} listed twice"));
            }
        }
        for e in &self.external {
            if e.system_id.is_empty() || BUILTIN_SYSTEMS.contains(&e.system_id.as_str()) {
                return bad(format!("external: invalid system id '{}'", e.system_id));
            }
            if !ids.insert(e.system_id.as_str()) {
                return bad(format!("external: {} listed twice", e.system_id));
            }
        }
        if self.perturb.period == 0 {
            return bad("perturb.period must be >= 1".into());
        }
        if !(self.perturb.saturation_factor >= 0.0) || !(self.perturb.omega0 > 0.0) {
            return bad("perturb: saturation_factor must be >= 0 and omega0 > 0".into());
        }
        if self.sentiment.provider == SentimentSource::File && self.sentiment.path.is_none() {
            return bad("sentiment.path is required when provider = \"file\"".into());
        }
        if self.arima.p_max > MAX_ORDER || self.arima.q_max > MAX_ORDER {
            return bad(format!("arima: orders above {MAX_ORDER} are not supported"));
        }
        if !(self.biased.const_offset >= 0.0 && self.biased.other_offset >= 0.0) {
            return bad("biased: offsets must be >= 0".into());
        }
        if !(self.random.margin >= 0.0) {
            return bad("random.margin must be >= 0".into());
        }
        let m = &self.metrics;
        if m.cis.is_empty() || m.cis.len() != m.weights.len() {
            return bad(format!(
                "metrics: {} confidence levels but {} weights",
                m.cis.len(),
                m.weights.len()
            ));
        }
        if m.cis.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
            return bad("metrics.cis must lie in (0, 1)".into());
        }
        if !(m.eps >= 0.0) {
            return bad("metrics.eps must be >= 0".into());
        }
        let c = &self.causal;
        if !(c.sample_fraction > 0.0 && c.sample_fraction <= 1.0) {
            return bad("causal.sample_fraction must lie in (0, 1]".into());
        }
        let weights = std::iter::once((c.treated_weight, c.control_weight))
            .chain(c.distributions.iter().map(|d| (d.treated_weight, d.control_weight)));
        for (t, k) in weights {
            if !(t > 0.0 && k > 0.0) {
                return bad("causal: distribution weights must be > 0".into());
            }
        }
        let tags: BTreeSet<_> = c.distributions.iter().map(|d| &d.tag).collect();
        if tags.len() != c.distributions.len() {
            return bad("causal.distributions: duplicate tags".into());
        }
        if self.rating.levels == 0 {
            return bad("rating.levels must be >= 1".into());
        }
        Ok(())
    }

    pub fn require_inputs(&self) -> Result<(), Invalid> {
        for p in [&self.data.prices, &self.data.metadata] {
            if !p.is_file() {
                return Err(Invalid(format!("input file {} does not exist", p.display())));
            }
        }
        if self.sentiment.provider == SentimentSource::File {
            let p = self.sentiment.path.as_ref().expect("checked in validate");
            if !p.is_file() {
                return Err(Invalid(format!("sentiment file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn to_lock(&self) -> String {
        toml::to_string(&self.resolved()).expect("config serializes")
    }
}
