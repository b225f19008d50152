//! `prepare`: windows for every perturbation, spectrogram images and the
//! exchange manifest for external systems.

use std::collections::BTreeMap;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use tsrate_core::data::{load_price_table, make_perturbed_windows, make_windows, PerturbationId, WindowSample};
use tsrate_core::forecast::exchange::export_windows_for_external;
use tsrate_core::image::{Provenance, SpectroImage};
use tsrate_core::perturb::{
    apply_drop_to_zero, apply_saturation, apply_sentiment_stripe, apply_single_pixel, apply_value_halved,
    FileSentiment, HeuristicSentiment, SentimentLabel, SentimentProvider,
};
use tsrate_core::specgram::{render_image, series_stripe};

use crate::config::{RunConfig, SentimentSource};
use crate::workspace::{write_csv_with_header, write_jsonl, Workspace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepareSummary {
    pub windows: BTreeMap<PerturbationId, usize>,
    pub images: usize,
    pub skipped_entities: usize,
}

#[derive(Serialize)]
struct SentimentRow<'a> {
    window_id: &'a str,
    label: i8,
}

fn relabel_image(img: SpectroImage, window: &WindowSample, p: PerturbationId) -> SpectroImage {
    SpectroImage {
        provenance: Provenance {
            window_id: tsrate_core::data::window_id(&window.entity_id, window.t_index, p),
            perturbation: p,
        },
        ..img
    }
}

fn provider(cfg: &RunConfig, p5: &[WindowSample]) -> anyhow::Result<Box<dyn SentimentProvider>> {
    Ok(match cfg.sentiment.provider {
        SentimentSource::Heuristic => Box::new(HeuristicSentiment {
            threshold: cfg.sentiment.threshold,
        }),
        SentimentSource::File => {
            let path = cfg.sentiment.path.as_ref().expect("checked in validate");
            let labels = FileSentiment::load(path)?;
            labels.check_covers(p5.iter().map(|w| w.window_id.as_str()))?;
            Box::new(labels)
        }
    })
}

pub fn run(cfg: &RunConfig, ws: &Workspace) -> anyhow::Result<PrepareSummary> {
    cfg.require_inputs()?;
    let table = load_price_table(&cfg.data.prices, &cfg.data.metadata)?;
    let (n, d, stride) = (cfg.windows.n, cfg.windows.d, cfg.windows.stride);
    let base = make_windows(&table, n, d, stride)?;
    let period = cfg.perturb.period;

    let mut by_p: BTreeMap<PerturbationId, Vec<WindowSample>> = BTreeMap::new();
    for &p in &cfg.perturbations {
        let windows = match p {
            PerturbationId::P0 => base.windows.clone(),
            PerturbationId::P1 => {
                let inputs = table.map_prices(|s| apply_drop_to_zero(s, period));
                make_perturbed_windows(&table, &inputs, n, d, stride, p)?.windows
            }
            PerturbationId::P2 => {
                let inputs = table.map_prices(|s| apply_value_halved(s, period));
                make_perturbed_windows(&table, &inputs, n, d, stride, p)?.windows
            }
            _ => base.windows.iter().map(|w| w.relabel(p)).collect(),
        };
        by_p.insert(p, windows);
    }

    let image_perts: Vec<PerturbationId> = cfg
        .perturbations
        .iter()
        .copied()
        .filter(|p| p.is_image_only())
        .collect();
    let want_p5 = image_perts.contains(&PerturbationId::P5);
    let sentiment = provider(cfg, by_p.get(&PerturbationId::P5).map_or(&[], Vec::as_slice))?;
    let labels: Vec<Option<SentimentLabel>> = if want_p5 {
        by_p[&PerturbationId::P5]
            .iter()
            .map(|w| sentiment.label(w).map(Some))
            .collect::<Result<_, _>>()?
    } else {
        vec![None; base.windows.len()]
    };

    ws.reset(&ws.windows())?;
    ws.reset(&ws.images())?;
    let image_dir = ws.images();

    // one P0 render per window, derived variants written alongside
    let files: Vec<Vec<(String, String)>> = base
        .windows
        .par_iter()
        .zip(labels.par_iter())
        .map(|(w, label)| -> anyhow::Result<Vec<(String, String)>> {
            let p0 = render_image(w, &series_stripe(&w.input)?, cfg.perturb.omega0)?;
            let mut variants = vec![p0.clone()];
            for &p in &image_perts {
                let img = match p {
                    PerturbationId::P3 => apply_single_pixel(&p0)?,
                    PerturbationId::P4 => apply_saturation(&p0, cfg.perturb.saturation_factor)?,
                    PerturbationId::P5 => apply_sentiment_stripe(&p0, label.expect("labels computed for P5"))?,
                    _ => unreachable!("image-only perturbations are P3..P5"),
                };
                variants.push(relabel_image(img, w, p));
            }
            variants
                .into_iter()
                .map(|img| {
                    let name = img.file_name();
                    img.write_png(&image_dir.join(&name))?;
                    Ok((img.provenance.window_id.clone(), name))
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;
    let images: BTreeMap<String, String> = files
        .into_iter()
        .flatten()
        .map(|(id, name)| (id, format!("../../images/{name}")))
        .collect();

    for (p, windows) in &by_p {
        write_jsonl(&ws.window_file(*p), windows)?;
    }
    write_csv_with_header(
        &ws.windows().join("warnings.csv"),
        &["entity_id", "length", "required"],
        &base.warnings,
    )?;
    if want_p5 {
        let rows: Vec<SentimentRow> = by_p[&PerturbationId::P5]
            .iter()
            .zip(&labels)
            .map(|(w, l)| SentimentRow {
                window_id: &w.window_id,
                label: l.expect("labels computed for P5").value(),
            })
            .collect();
        write_csv_with_header(&ws.windows().join("sentiment.csv"), &["window_id", "label"], &rows)?;
    }
    let all: Vec<WindowSample> = by_p.values().flatten().cloned().collect();
    export_windows_for_external(&all, &images, &ws.exchange()).context("writing exchange manifest")?;

    Ok(PrepareSummary {
        windows: by_p.iter().map(|(p, w)| (*p, w.len())).collect(),
        images: images.len(),
        skipped_entities: base.warnings.len(),
    })
}
