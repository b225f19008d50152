//! Morlet continuous wavelet transform and image assembly.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::data::{standardize, WindowSample};
use crate::error::{Error, Result};
use crate::image::{Provenance, Rgb, SpectroImage, IMAGE_WIDTH, SPEC_ROWS, STRIPE_ROWS};

pub const DEFAULT_OMEGA0: f64 = 5.0;

/// Standardized values beyond this many deviations saturate the stripe.
const STRIPE_CLIP: f64 = 3.0;

#[inline]
fn morlet_unchecked(x: f64, s: f64, omega0: f64) -> Complex64 {
    let norm = (1.0 / s).sqrt() * PI.powf(-0.25);
    Complex64::new(-x * x / (2.0 * s * s), omega0 * x / s).exp() * norm
}

/// Morlet wavelet at offset `x` and scale `s`:
/// `sqrt(1/s) * pi^(-1/4) * exp(-x^2 / 2s^2) * exp(i * omega0 * x / s)`.
pub fn morlet(x: f64, s: f64, omega0: f64) -> Result<Complex64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Argument(format!("wavelet scale must be > 0, got {s}")));
    }
    Ok(morlet_unchecked(x, s, omega0))
}

/// `count` geometrically spaced scales from `s_min` to `s_max`, ascending.
pub fn scale_grid(count: usize, s_min: f64, s_max: f64) -> Result<Vec<f64>> {
    if count == 0 || !(s_min > 0.0) || s_max < s_min {
        return Err(Error::Argument(format!(
            "bad scale grid: count={count}, range=[{s_min}, {s_max}]"
        )));
    }
    if count == 1 {
        return Ok(vec![s_min]);
    }
    let ratio = (s_max / s_min).ln() / (count - 1) as f64;
    Ok((0..count).map(|k| s_min * (ratio * k as f64).exp()).collect())
}

/// Default image grid: one scale per spectrogram row, from 1 to n/2.
pub fn default_scales(n: usize) -> Result<Vec<f64>> {
    scale_grid(SPEC_ROWS, 1.0, (n as f64 / 2.0).max(1.0))
}

/// Magnitude scalogram, `scales.len()` rows by `series.len()` columns.
///
/// Entry `(k, t)` is `|sum_u series[u] * conj(psi(u - t; s_k))|`, with the
/// series treated as zero outside its bounds.
pub fn cwt(series: &[f64], scales: &[f64], omega0: f64) -> Result<Vec<Vec<f64>>> {
    if scales.is_empty() {
        return Err(Error::Argument("cwt needs at least one scale".into()));
    }
    if let Some(s) = scales.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Argument(format!("wavelet scale must be > 0, got {s}")));
    }
    let n = series.len();
    if n == 0 {
        return Ok(vec![Vec::new(); scales.len()]);
    }
    let mut out = Vec::with_capacity(scales.len());
    // kernel[j] = conj(psi(j - (n - 1)))
    let mut kernel = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for &s in scales {
        for (j, k) in kernel.iter_mut().enumerate() {
            *k = morlet_unchecked(j as f64 - (n - 1) as f64, s, omega0).conj();
        }
        let row = (0..n)
            .map(|t| {
                let acc: Complex64 = series.iter().enumerate().map(|(u, &v)| kernel[u + n - 1 - t] * v).sum();
                acc.norm()
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Piecewise-linear colour ramp: blue at 0, pale green at 0.5, red at 1.
pub fn colormap(v: f64) -> Rgb {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let c = |x: f64| (255.0 * x).round() as u8;
    [c(v), c(1.0 - (2.0 * v - 1.0).abs()), c(1.0 - v)]
}

/// Linear interpolation of `values` onto `width` evenly spaced points
/// spanning the same interval.
pub fn resample_linear(values: &[f64], width: usize) -> Vec<f64> {
    match values.len() {
        0 => vec![0.0; width],
        1 => vec![values[0]; width],
        len => (0..width)
            .map(|c| {
                let x = if width == 1 {
                    0.0
                } else {
                    c as f64 * (len - 1) as f64 / (width - 1) as f64
                };
                let i = (x.floor() as usize).min(len - 2);
                let frac = x - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            })
            .collect(),
    }
}

/// Intensity stripe for a numeric window: standardize, clip to +-3 sigma,
/// map linearly onto 0..=255 (zero lands on 128) and stretch to 128 columns.
pub fn series_stripe(input: &[f64]) -> Result<[u8; IMAGE_WIDTH]> {
    let z = standardize(input)?;
    let cols = resample_linear(&z.scaled, IMAGE_WIDTH);
    let mut stripe = [0u8; IMAGE_WIDTH];
    for (px, v) in stripe.iter_mut().zip(cols) {
        let unit = (v.clamp(-STRIPE_CLIP, STRIPE_CLIP) + STRIPE_CLIP) / (2.0 * STRIPE_CLIP);
        *px = (unit * 255.0).round() as u8;
    }
    Ok(stripe)
}

/// Renders the 128x128 multimodal image for a window.
///
/// The spectrogram of the standardized input fills rows 16..128 with the
/// smallest scale on row 16, time stretched linearly to 128 columns and
/// magnitudes min-max normalized per image before colouring. `stripe` is
/// painted as grayscale on rows 0..16.
pub fn render_image(window: &WindowSample, stripe: &[u8; IMAGE_WIDTH], omega0: f64) -> Result<SpectroImage> {
    let scales = default_scales(window.input.len())?;
    render_image_with_scales(window, stripe, omega0, &scales)
}

pub fn render_image_with_scales(
    window: &WindowSample,
    stripe: &[u8; IMAGE_WIDTH],
    omega0: f64,
    scales: &[f64],
) -> Result<SpectroImage> {
    if scales.len() != SPEC_ROWS {
        return Err(Error::Argument(format!(
            "need {SPEC_ROWS} scales for the spectrogram rows, got {}",
            scales.len()
        )));
    }
    let z = standardize(&window.input)?;
    let mags = cwt(&z.scaled, scales, omega0)?;
    let rows: Vec<Vec<f64>> = mags.iter().map(|r| resample_linear(r, IMAGE_WIDTH)).collect();

    let (lo, hi) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;

    let mut img = SpectroImage::blank(Provenance {
        window_id: window.window_id.clone(),
        perturbation: window.perturbation,
    });
    img.paint_stripe(stripe);
    for (k, row) in rows.iter().enumerate() {
        for (col, &v) in row.iter().enumerate() {
            let unit = if span > 0.0 { (v - lo) / span } else { 0.0 };
            img.set_pixel(STRIPE_ROWS + k, col, colormap(unit));
        }
    }
    Ok(img)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::data::PerturbationId;
    use proptest::prelude::*;

    /// Real and imaginary parts assembled from cos/sin directly.
    fn morlet_oracle(x: f64, s: f64, w0: f64) -> (f64, f64) {
        let env = s.powf(-0.5) * PI.powf(-0.25) * (-(x / s).powi(2) / 2.0).exp();
        (env * (w0 * x / s).cos(), env * (w0 * x / s).sin())
    }

    fn window(input: Vec<f64>) -> WindowSample {
        WindowSample {
            window_id: "AAA-00079-P0".into(),
            entity_id: "AAA".into(),
            industry: "tech".into(),
            t_index: 79,
            input,
            truth: vec![1.0; 20],
            perturbation: PerturbationId::P0,
            distribution_tag: None,
        }
    }

    #[test]
    fn morlet_at_origin() {
        let v = morlet(0.0, 1.0, 5.0).unwrap();
        assert!((v.re - 0.751_125_544_464_942_48).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
        let v = morlet(0.0, 4.0, 5.0).unwrap();
        assert!((v.re - 0.5 * PI.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn morlet_frozen_values() {
        // mpmath, 30 digits
        let cases = [
            (1.5, 2.0, 5.0, -0.32897448318822939, -0.22914745625871392),
            (-3.0, 1.25, 5.0, 0.031824142435489358, 0.020235696938746249),
            (10.0, 12.7, 5.0, -0.10821062130016797, -0.1104005349664054),
        ];
        for (x, s, w0, re, im) in cases {
            let v = morlet(x, s, w0).unwrap();
            assert!((v.re - re).abs() <= 1e-12 * re.abs().max(1e-3), "{x} {s}: {v}");
            assert!((v.im - im).abs() <= 1e-12 * im.abs().max(1e-3), "{x} {s}: {v}");
        }
    }

    #[test]
    fn morlet_rejects_bad_scale() {
        assert!(morlet(0.0, 0.0, 5.0).is_err());
        assert!(morlet(0.0, -1.0, 5.0).is_err());
    }

    #[test]
    fn cwt_zero_series_and_linearity() {
        let scales = default_scales(80).unwrap();
        let zero = cwt(&[0.0; 80], &scales, 5.0).unwrap();
        assert!(zero.iter().flatten().all(|v| *v == 0.0));

        let x: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin() + 0.1 * i as f64).collect();
        let cx: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
        let a = cwt(&x, &scales, 5.0).unwrap();
        let b = cwt(&cx, &scales, 5.0).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            for (va, vb) in ra.iter().zip(rb) {
                assert!((vb - 2.5 * va).abs() <= 1e-10 * (1.0 + va.abs()));
            }
        }
        assert!(cwt(&x, &[], 5.0).is_err());
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), [0, 0, 255]);
        assert_eq!(colormap(1.0), [255, 0, 0]);
        assert_eq!(colormap(0.5), [128, 255, 128]);
        assert_eq!(colormap(-3.0), colormap(0.0));
        assert_eq!(colormap(7.0), colormap(1.0));
    }

    #[test]
    fn scale_grid_spans_range() {
        let g = default_scales(80).unwrap();
        assert_eq!(g.len(), 112);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[111] - 40.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn render_layout() {
        let ramp: Vec<f64> = (0..80).map(|i| 100.0 + i as f64).collect();
        let w = window(ramp.clone());
        let stripe = series_stripe(&w.input).unwrap();
        assert!(stripe.windows(2).all(|p| p[0] <= p[1]));
        let img = render_image(&w, &stripe, DEFAULT_OMEGA0).unwrap();
        assert_eq!((img.width, img.height), (128, 128));
        for (col, &v) in stripe.iter().enumerate() {
            let top = img.pixel(0, col);
            assert_eq!(top, [v; 3]);
            assert_eq!(img.pixel(15, col), top);
        }
        let again = render_image(&w, &stripe, DEFAULT_OMEGA0).unwrap();
        assert_eq!(img, again);
    }

    #[test]
    fn constant_window_uses_colormap_floor() {
        let w = window(vec![42.0; 80]);
        let stripe = series_stripe(&w.input).unwrap();
        assert!(stripe.iter().all(|v| *v == 128));
        let img = render_image(&w, &stripe, DEFAULT_OMEGA0).unwrap();
        for row in STRIPE_ROWS..128 {
            for col in 0..128 {
                assert_eq!(img.pixel(row, col), colormap(0.0));
            }
        }
    }

    proptest! {
        #[test]
        fn morlet_matches_oracle(x in -60.0f64..60.0, s in 0.05f64..50.0, w0 in 1.0f64..8.0) {
            let v = morlet(x, s, w0).unwrap();
            let (re, im) = morlet_oracle(x, s, w0);
            let mag = (re * re + im * im).sqrt();
            prop_assume!(mag > 1e-280);
            let err = ((v.re - re).powi(2) + (v.im - im).powi(2)).sqrt();
            prop_assert!(err <= 1e-12 * mag, "x={x} s={s}: rel err {}", err / mag);
        }

        #[test]
        fn morlet_magnitude_even(x in -40.0f64..40.0, s in 0.1f64..40.0) {
            let a = morlet(x, s, 5.0).unwrap().norm();
            let b = morlet(-x, s, 5.0).unwrap().norm();
            prop_assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
        }
    }
}
