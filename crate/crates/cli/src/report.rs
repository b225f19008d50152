//! Rating tables from raw scores: CSV plus a markdown rendering with the
//! partial order and the complete order per metric and perturbation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsrate_core::data::PerturbationId;
use tsrate_core::rating::RatingTable;

use crate::workspace::{read_csv, write_csv_with_header, write_text, Workspace};
use crate::Invalid;

type ScoresByPerturbation = BTreeMap<PerturbationId, BTreeMap<String, f64>>;

pub const METRIC_FAMILIES: [&str; 9] = [
    "WRS_I", "WRS_C", "PIE_I", "PIE_C", "APE_I", "APE_C", "SMAPE", "MASE", "SignAcc",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub metric: String,
    pub perturbation: PerturbationId,
    pub system: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmittedRow {
    pub metric: String,
    pub perturbation: PerturbationId,
    pub system: String,
    pub reason: String,
}

#[derive(Serialize)]
struct RatingCsvRow<'a> {
    metric: &'a str,
    perturbation: PerturbationId,
    system: &'a str,
    score: f64,
    rating: usize,
}

/// Known families first in their canonical order, anything else after.
fn metric_rank(m: &str) -> (usize, &str) {
    (
        METRIC_FAMILIES
            .iter()
            .position(|f| *f == m)
            .unwrap_or(METRIC_FAMILIES.len()),
        m,
    )
}

pub fn sort_scores(rows: &mut [ScoreRow]) {
    rows.sort_by(|a, b| {
        metric_rank(&a.metric)
            .cmp(&metric_rank(&b.metric))
            .then(a.perturbation.cmp(&b.perturbation))
            .then(a.system.cmp(&b.system))
    });
}

pub fn sort_omitted(rows: &mut [OmittedRow]) {
    rows.sort_by(|a, b| {
        metric_rank(&a.metric)
            .cmp(&metric_rank(&b.metric))
            .then(a.perturbation.cmp(&b.perturbation))
            .then(a.system.cmp(&b.system))
            .then(a.reason.cmp(&b.reason))
    });
}

pub fn read_scores(path: &Path) -> anyhow::Result<Vec<ScoreRow>> {
    if !path.is_file() {
        return Err(Invalid(format!("score file {} does not exist", path.display())).into());
    }
    let rows: Vec<ScoreRow> = read_csv(path).map_err(|e| Invalid(format!("{e:#}")))?;
    let mut seen = std::collections::BTreeSet::new();
    for r in &rows {
        if !seen.insert((&r.metric, r.perturbation, &r.system)) {
            return Err(Invalid(format!(
                "{}: duplicate score for ({}, {}, {})",
                path.display(),
                r.metric,
                r.perturbation,
                r.system
            ))
            .into());
        }
    }
    Ok(rows)
}

/// One rating table per metric, rows per perturbation.
pub fn build_tables(scores: &[ScoreRow], levels: usize) -> anyhow::Result<Vec<RatingTable>> {
    let mut by_metric: BTreeMap<(usize, &str), ScoresByPerturbation> = BTreeMap::new();
    for s in scores {
        by_metric
            .entry(metric_rank(&s.metric))
            .or_default()
            .entry(s.perturbation)
            .or_default()
            .insert(s.system.clone(), s.score);
    }
    by_metric
        .into_iter()
        .map(|((_, metric), cells)| {
            Ok(RatingTable::build(metric, levels, &cells).map_err(|e| Invalid(format!("{metric}: {e}")))?)
        })
        .collect()
}

pub fn render_markdown(tables: &[RatingTable], omitted: &[OmittedRow]) -> String {
    let mut out = String::from("# Ratings\n");
    for t in tables {
        let _ = write!(
            out,
            "\n## {} (L = {})\n\n| P | Partial Order | Complete Order |\n|---|---|---|\n",
            t.metric_id, t.levels
        );
        for row in &t.rows {
            let partial: Vec<String> = row.partial_order.iter().map(|(s, v)| format!("{s}: {v}")).collect();
            let complete: Vec<String> = row
                .partial_order
                .iter()
                .map(|(s, _)| format!("{s}: {}", row.ratings[s]))
                .collect();
            let _ = writeln!(
                out,
                "| {} | {{{}}} | {{{}}} |",
                row.perturbation,
                partial.join(", "),
                complete.join(", ")
            );
        }
    }
    if !omitted.is_empty() {
        out.push_str("\n## Omitted\n\n| Metric | P | System | Reason |\n|---|---|---|---|\n");
        for o in omitted {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                o.metric, o.perturbation, o.system, o.reason
            );
        }
    }
    out
}

pub fn rating_rows(tables: &[RatingTable]) -> Vec<(String, PerturbationId, String, f64, usize)> {
    let mut rows = Vec::new();
    for t in tables {
        for r in &t.rows {
            for (s, v) in &r.partial_order {
                rows.push((t.metric_id.clone(), r.perturbation, s.clone(), *v, r.ratings[s]));
            }
        }
    }
    rows
}

pub fn write_ratings_csv(path: &Path, tables: &[RatingTable]) -> anyhow::Result<()> {
    let rows = rating_rows(tables);
    let rows: Vec<RatingCsvRow> = rows
        .iter()
        .map(|(m, p, s, v, r)| RatingCsvRow {
            metric: m,
            perturbation: *p,
            system: s,
            score: *v,
            rating: *r,
        })
        .collect();
    write_csv_with_header(path, &["metric", "perturbation", "system", "score", "rating"], &rows)
}

pub fn write_scores(ws: &Workspace, scores: &[ScoreRow], omitted: &[OmittedRow]) -> anyhow::Result<()> {
    write_csv_with_header(
        &ws.analysis().join("scores.csv"),
        &["metric", "perturbation", "system", "score"],
        scores,
    )?;
    write_csv_with_header(
        &ws.analysis().join("omitted.csv"),
        &["metric", "perturbation", "system", "reason"],
        omitted,
    )
}

pub fn write_reports(
    ws: &Workspace,
    scores: &[ScoreRow],
    omitted: &[OmittedRow],
    levels: usize,
) -> anyhow::Result<String> {
    let tables = build_tables(scores, levels)?;
    ws.reset(&ws.reports())?;
    write_ratings_csv(&ws.reports().join("ratings.csv"), &tables)?;
    let md = render_markdown(&tables, omitted);
    write_text(&ws.reports().join("ratings.md"), &md)?;
    Ok(md)
}

/// `report`: regenerate `reports/` from the persisted scores.
pub fn run(ws: &Workspace, levels: usize) -> anyhow::Result<String> {
    let scores_path = ws.analysis().join("scores.csv");
    if !scores_path.is_file() {
        return Err(Invalid(format!("{} missing; run `tsrate rate` first", scores_path.display())).into());
    }
    let scores = read_scores(&scores_path)?;
    let omitted_path = ws.analysis().join("omitted.csv");
    let omitted: Vec<OmittedRow> = if omitted_path.is_file() {
        read_csv(&omitted_path)?
    } else {
        Vec::new()
    };
    write_reports(ws, &scores, &omitted, levels)
}
