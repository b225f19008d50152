//! Perturbation operators.
//!
//! P1 and P2 act on the raw price series before windowing. P3 and P4 act on
//! rendered images. P5 swaps the image's intensity stripe for a sentiment
//! stripe and leaves the spectrogram alone.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::image::{SpectroImage, IMAGE_WIDTH};

pub const DEFAULT_PERIOD: usize = 80;
pub const DEFAULT_SATURATION_FACTOR: f64 = 10.0;
pub const DEFAULT_SENTIMENT_THRESHOLD: f64 = 0.05;

fn map_every(series: &[f64], period: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    series
        .iter()
        .enumerate()
        .map(|(i, &v)| if period > 0 && (i + 1) % period == 0 { f(v) } else { v })
        .collect()
}

/// P1: zero every `period`-th value (0-based indices `period-1, 2*period-1, ...`).
/// A `period` of 0 targets nothing.
pub fn apply_drop_to_zero(series: &[f64], period: usize) -> Vec<f64> {
    map_every(series, period, |_| 0.0)
}

/// P2: halve every `period`-th value.
pub fn apply_value_halved(series: &[f64], period: usize) -> Vec<f64> {
    map_every(series, period, |v| v / 2.0)
}

/// Indices touched by P1/P2 for a series of length `len`.
pub fn targeted_indices(len: usize, period: usize) -> impl Iterator<Item = usize> {
    (1..=len.checked_div(period).unwrap_or(0)).map(move |k| k * period - 1)
}

/// P3: paint the centre pixel `(height/2, width/2)` black.
pub fn apply_single_pixel(image: &SpectroImage) -> Result<SpectroImage> {
    image.check_dimensions()?;
    let mut out = image.clone();
    out.set_pixel(image.height / 2, image.width / 2, [0, 0, 0]);
    Ok(out)
}

/// Hexcone RGB -> HSV, all channels in `[0, 1]`; hue is a fraction of a turn.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / chroma).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / chroma + 2.0) / 6.0
    } else {
        ((r - g) / chroma + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let c = v * s;
    let hp = h.rem_euclid(1.0) * 6.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

/// P4: scale HSV saturation by `factor`, clamped at 1.
pub fn apply_saturation(image: &SpectroImage, factor: f64) -> Result<SpectroImage> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::Argument(format!("saturation factor must be > 0, got {factor}")));
    }
    let mut out = image.clone();
    let to_byte = |x: f64| (x * 255.0).round().clamp(0.0, 255.0) as u8;
    for px in out.pixels.chunks_exact_mut(3) {
        let (h, s, v) = rgb_to_hsv(px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0);
        if s == 0.0 {
            continue;
        }
        let (r, g, b) = hsv_to_rgb(h, (s * factor).min(1.0), v);
        px[0] = to_byte(r);
        px[1] = to_byte(g);
        px[2] = to_byte(b);
    }
    Ok(out)
}

/// Ternary market sentiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    pub fn value(self) -> i8 {
        match self {
            SentimentLabel::Negative => -1,
            SentimentLabel::Neutral => 0,
            SentimentLabel::Positive => 1,
        }
    }

    pub fn intensity(self) -> u8 {
        match self {
            SentimentLabel::Negative => 0,
            SentimentLabel::Neutral => 128,
            SentimentLabel::Positive => 255,
        }
    }
}

impl TryFrom<i8> for SentimentLabel {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(SentimentLabel::Negative),
            0 => Ok(SentimentLabel::Neutral),
            1 => Ok(SentimentLabel::Positive),
            other => Err(format!("sentiment label must be -1, 0 or 1, got {other}")),
        }
    }
}

impl From<SentimentLabel> for i8 {
    fn from(l: SentimentLabel) -> i8 {
        l.value()
    }
}

/// Trend-based stand-in for an image sentiment model: OLS slope over the
/// window, scaled by window length over mean price, compared against `tau`.
pub fn heuristic_sentiment(input: &[f64], tau: f64) -> SentimentLabel {
    let n = input.len();
    if n < 2 {
        return SentimentLabel::Neutral;
    }
    let nf = n as f64;
    let mean_x = (nf - 1.0) / 2.0;
    let mean_y = input.iter().sum::<f64>() / nf;
    if mean_y == 0.0 || !mean_y.is_finite() {
        return SentimentLabel::Neutral;
    }
    let (sxy, sxx) = input.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, &y)| {
        let dx = i as f64 - mean_x;
        (sxy + dx * (y - mean_y), sxx + dx * dx)
    });
    let rel = (sxy / sxx) * nf / mean_y;
    if rel > tau {
        SentimentLabel::Positive
    } else if rel < -tau {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    }
}

/// Uniform stripe carrying a sentiment label.
pub fn sentiment_stripe(label: SentimentLabel) -> [u8; IMAGE_WIDTH] {
    [label.intensity(); IMAGE_WIDTH]
}

/// P5: replace the intensity stripe with the sentiment stripe.
pub fn apply_sentiment_stripe(image: &SpectroImage, label: SentimentLabel) -> Result<SpectroImage> {
    image.check_dimensions()?;
    let mut out = image.clone();
    out.paint_stripe(&sentiment_stripe(label));
    Ok(out)
}

/// Source of sentiment labels for the composite perturbation.
pub trait SentimentProvider: Sync {
    fn label(&self, window: &WindowSample) -> Result<SentimentLabel>;
}

#[derive(Debug, Clone, Copy)]
pub struct HeuristicSentiment {
    pub threshold: f64,
}

impl Default for HeuristicSentiment {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_SENTIMENT_THRESHOLD,
        }
    }
}

impl SentimentProvider for HeuristicSentiment {
    fn label(&self, window: &WindowSample) -> Result<SentimentLabel> {
        Ok(heuristic_sentiment(&window.input, self.threshold))
    }
}

#[derive(Debug, Deserialize)]
struct SentimentLine {
    window_id: String,
    label: SentimentLabel,
}

/// Labels read from a line-delimited `{"window_id", "label"}` file.
#[derive(Debug, Clone, Default)]
pub struct FileSentiment {
    labels: BTreeMap<String, SentimentLabel>,
}

impl FileSentiment {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut labels = BTreeMap::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SentimentLine = serde_json::from_str(&line)
                .map_err(|e| Error::Sentiment(format!("{} line {}: {e}", path.display(), i + 1)))?;
            if labels.insert(rec.window_id.clone(), rec.label).is_some() {
                return Err(Error::Sentiment(format!(
                    "{} line {}: duplicate window_id {}",
                    path.display(),
                    i + 1,
                    rec.window_id
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn from_labels(labels: BTreeMap<String, SentimentLabel>) -> Self {
        Self { labels }
    }

    /// Fails listing every id without a label.
    pub fn check_covers<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: Vec<&str> = ids.into_iter().filter(|id| !self.labels.contains_key(*id)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Sentiment(format!(
                "no sentiment label for window ids: {}",
                missing.join(", ")
            )))
        }
    }
}

impl SentimentProvider for FileSentiment {
    fn label(&self, window: &WindowSample) -> Result<SentimentLabel> {
        self.labels
            .get(&window.window_id)
            .copied()
            .ok_or_else(|| Error::Sentiment(format!("no sentiment label for window ids: {}", window.window_id)))
    }
}
