//! Price tables, sliding windows and standardization.
//!
//! Price files are comma-separated with header `date,entity_id,adj_close`;
//! metadata files carry `entity_id,industry`. Dates are ISO `YYYY-MM-DD`
//! strings and are ordered lexically.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Perturbation applied to a window. `P0` is the unperturbed control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PerturbationId {
    P0,
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl PerturbationId {
    pub const ALL: [PerturbationId; 6] = [
        PerturbationId::P0,
        PerturbationId::P1,
        PerturbationId::P2,
        PerturbationId::P3,
        PerturbationId::P4,
        PerturbationId::P5,
    ];

    /// Semantic perturbations act on the numeric series before windowing.
    pub fn is_semantic(self) -> bool {
        matches!(self, PerturbationId::P1 | PerturbationId::P2)
    }

    /// Perturbations that only exist in image space.
    pub fn is_image_only(self) -> bool {
        matches!(self, PerturbationId::P3 | PerturbationId::P4 | PerturbationId::P5)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationId::P0 => "P0",
            PerturbationId::P1 => "P1",
            PerturbationId::P2 => "P2",
            PerturbationId::P3 => "P3",
            PerturbationId::P4 => "P4",
            PerturbationId::P5 => "P5",
        }
    }
}

impl fmt::Display for PerturbationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerturbationId::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Argument(format!("unknown perturbation `{s}`")))
    }
}

/// One entity's daily adjusted closing prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySeries {
    pub entity_id: String,
    pub industry: String,
    pub dates: Vec<String>,
    pub prices: Vec<f64>,
}

impl EntitySeries {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// (min, max) over the full series.
    pub fn price_range(&self) -> Option<(f64, f64)> {
        if self.prices.is_empty() {
            return None;
        }
        let min = self.prices.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((min, max))
    }
}

/// Per-entity price series, ordered by `entity_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTable {
    pub entities: Vec<EntitySeries>,
}

impl EntityTable {
    /// Builds a table from in-memory series, checking the same invariants as
    /// file ingestion.
    pub fn new(mut entities: Vec<EntitySeries>) -> Result<Self> {
        entities.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        for pair in entities.windows(2) {
            if pair[0].entity_id == pair[1].entity_id {
                return Err(Error::Metadata(format!("entity {} listed twice", pair[0].entity_id)));
            }
        }
        for e in &entities {
            if e.dates.len() != e.prices.len() {
                return Err(Error::Argument(format!(
                    "entity {}: {} dates but {} prices",
                    e.entity_id,
                    e.dates.len(),
                    e.prices.len()
                )));
            }
            for (i, w) in e.dates.windows(2).enumerate() {
                if w[0] >= w[1] {
                    return Err(Error::Ingestion {
                        entity: e.entity_id.clone(),
                        date: e.dates[i + 1].clone(),
                        reason: "dates not strictly increasing".into(),
                    });
                }
            }
            if let Some((i, p)) = e.prices.iter().enumerate().find(|(_, p)| !p.is_finite() || **p <= 0.0) {
                return Err(Error::Validation {
                    row: i + 1,
                    reason: format!("entity {}: price {p} must be finite and > 0", e.entity_id),
                });
            }
        }
        Ok(Self { entities })
    }

    pub fn get(&self, entity_id: &str) -> Option<&EntitySeries> {
        self.entities
            .binary_search_by(|e| e.entity_id.as_str().cmp(entity_id))
            .ok()
            .map(|i| &self.entities[i])
    }

    /// Industry label per entity.
    pub fn industries(&self) -> BTreeMap<String, String> {
        self.entities
            .iter()
            .map(|e| (e.entity_id.clone(), e.industry.clone()))
            .collect()
    }

    /// Returns a copy with every price series passed through `f`. The
    /// result bypasses the positivity invariant, since perturbations may
    /// legitimately write zeros.
    pub fn map_prices(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> EntityTable {
        EntityTable {
            entities: self
                .entities
                .iter()
                .map(|e| EntitySeries {
                    prices: f(&e.prices),
                    ..e.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    entity_id: String,
    adj_close: String,
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    entity_id: String,
    industry: String,
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want {
        return Err(Error::Validation {
            row: 1,
            reason: format!(
                "{}: expected header `{}`, found `{}`",
                path.display(),
                want.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Loads a price table and its industry metadata.
pub fn load_price_table(price_path: &Path, meta_path: &Path) -> Result<EntityTable> {
    let industries = load_metadata(meta_path)?;

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(price_path)
        .map_err(|e| Error::csv(price_path, e))?;
    let header = rdr.headers().map_err(|e| Error::csv(price_path, e))?.clone();
    check_header(price_path, &header, &["date", "entity_id", "adj_close"])?;

    let mut per_entity: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<PriceRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::Validation {
            row: line,
            reason: e.to_string(),
        })?;
        if row.entity_id.is_empty() {
            return Err(Error::Validation {
                row: line,
                reason: "empty entity_id".into(),
            });
        }
        if !is_iso_date(&row.date) {
            return Err(Error::Ingestion {
                entity: row.entity_id,
                date: row.date,
                reason: format!("missing or malformed date at line {line}"),
            });
        }
        let price: f64 = row.adj_close.parse().map_err(|_| Error::Validation {
            row: line,
            reason: format!("unparseable price `{}`", row.adj_close),
        })?;
        if !price.is_finite() || price <= 0.0 {
            return Err(Error::Validation {
                row: line,
                reason: format!("price {} must be finite and > 0", row.adj_close),
            });
        }
        per_entity.entry(row.entity_id).or_default().push((row.date, price));
    }

    let mut entities = Vec::with_capacity(per_entity.len());
    for (entity_id, mut rows) in per_entity {
        let industry = industries
            .get(&entity_id)
            .cloned()
            .ok_or_else(|| Error::Metadata(format!("entity {entity_id} has no industry mapping")))?;
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Ingestion {
                entity: entity_id,
                date: w[0].0.clone(),
                reason: "duplicate date".into(),
            });
        }
        let (dates, prices) = rows.into_iter().unzip();
        entities.push(EntitySeries {
            entity_id,
            industry,
            dates,
            prices,
        });
    }
    EntityTable::new(entities)
}

fn load_metadata(meta_path: &Path) -> Result<HashMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(meta_path)
        .map_err(|e| Error::csv(meta_path, e))?;
    let header = rdr.headers().map_err(|e| Error::csv(meta_path, e))?.clone();
    check_header(meta_path, &header, &["entity_id", "industry"])?;

    let mut out = HashMap::new();
    for (i, row) in rdr.deserialize::<MetaRow>().enumerate() {
        let row = row.map_err(|e| Error::Metadata(format!("line {}: {e}", i + 2)))?;
        if row.industry.is_empty() {
            return Err(Error::Metadata(format!(
                "entity {} has an empty industry",
                row.entity_id
            )));
        }
        if let Some(prev) = out.insert(row.entity_id.clone(), row.industry.clone()) {
            if prev != row.industry {
                return Err(Error::Metadata(format!(
                    "entity {} mapped to both {prev} and {}",
                    row.entity_id, row.industry
                )));
            }
        }
    }
    Ok(out)
}

/// One (input, truth) pair cut from an entity series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub window_id: String,
    pub entity_id: String,
    pub industry: String,
    /// Index of the last input element in the source series.
    pub t_index: usize,
    pub input: Vec<f64>,
    pub truth: Vec<f64>,
    pub perturbation: PerturbationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution_tag: Option<String>,
}

/// Deterministic window key.
pub fn window_id(entity_id: &str, t_index: usize, perturbation: PerturbationId) -> String {
    format!("{entity_id}-{t_index:05}-{perturbation}")
}

impl WindowSample {
    /// Same window relabelled under another perturbation (numeric content
    /// unchanged). Used for the image-space perturbations.
    pub fn relabel(&self, perturbation: PerturbationId) -> WindowSample {
        WindowSample {
            window_id: window_id(&self.entity_id, self.t_index, perturbation),
            perturbation,
            ..self.clone()
        }
    }

    /// Most recent observed value.
    pub fn last_input(&self) -> f64 {
        *self.input.last().expect("window input is never empty")
    }
}

/// Emitted for entities too short to yield a window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowWarning {
    pub entity_id: String,
    pub length: usize,
    pub required: usize,
}

#[derive(Debug, Clone, Default)]
pub struct WindowSet {
    pub windows: Vec<WindowSample>,
    pub warnings: Vec<WindowWarning>,
}

/// Closed-form window count for a series of length `len`.
pub fn window_count(len: usize, n: usize, d: usize, stride: usize) -> usize {
    if len < n + d || stride == 0 {
        0
    } else {
        (len - n - d) / stride + 1
    }
}

fn check_window_args(n: usize, d: usize, stride: usize) -> Result<()> {
    if n < 2 || d < 1 || stride < 1 {
        return Err(Error::Argument(format!(
            "window shape n={n}, d={d}, stride={stride} (need n >= 2, d >= 1, stride >= 1)"
        )));
    }
    Ok(())
}

/// Slices every entity into P0 windows.
pub fn make_windows(table: &EntityTable, n: usize, d: usize, stride: usize) -> Result<WindowSet> {
    make_perturbed_windows(table, table, n, d, stride, PerturbationId::P0)
}

/// Windows whose inputs come from `inputs` (a perturbed copy of `clean`)
/// while the truth is always taken from the clean series.
pub fn make_perturbed_windows(
    clean: &EntityTable,
    inputs: &EntityTable,
    n: usize,
    d: usize,
    stride: usize,
    perturbation: PerturbationId,
) -> Result<WindowSet> {
    check_window_args(n, d, stride)?;
    let mut set = WindowSet::default();
    for entity in &clean.entities {
        let perturbed = inputs
            .get(&entity.entity_id)
            .ok_or_else(|| Error::Argument(format!("entity {} missing from input table", entity.entity_id)))?;
        if perturbed.len() != entity.len() {
            return Err(Error::Argument(format!(
                "entity {}: perturbed series length differs",
                entity.entity_id
            )));
        }
        let len = entity.len();
        if len < n + d {
            log::warn!(
                "entity {} has {len} observations, need {}; skipped",
                entity.entity_id,
                n + d
            );
            set.warnings.push(WindowWarning {
                entity_id: entity.entity_id.clone(),
                length: len,
                required: n + d,
            });
            continue;
        }
        let mut t = n - 1;
        while t + d < len {
            set.windows.push(WindowSample {
                window_id: window_id(&entity.entity_id, t, perturbation),
                entity_id: entity.entity_id.clone(),
                industry: entity.industry.clone(),
                t_index: t,
                input: perturbed.prices[t + 1 - n..=t].to_vec(),
                truth: entity.prices[t + 1..=t + d].to_vec(),
                perturbation,
                distribution_tag: None,
            });
            t += stride;
        }
    }
    Ok(set)
}

/// Output of [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub scaled: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation; 0 for a constant input.
    pub std: f64,
}

/// z-scores using the population standard deviation.
pub fn standardize(values: &[f64]) -> Result<Standardized> {
    if values.is_empty() {
        return Err(Error::Argument("cannot standardize an empty sequence".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scaled = if std == 0.0 {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|v| (v - mean) / std).collect()
    };
    Ok(Standardized { scaled, mean, std })
}
