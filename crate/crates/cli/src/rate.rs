//! `rate`: residuals, accuracy, WRS and causal scores, then ratings.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use tsrate_core::causal::{analyze, default_specs, CausalSummary, Confounder, DistributionSpec};
use tsrate_core::data::{PerturbationId, WindowSample};
use tsrate_core::forecast::ForecastRecord;
use tsrate_core::metrics::hypothesis::{all_pairs, company_pairs_within_industry, wrs, WrsConfig};
use tsrate_core::metrics::{residual_record, summarize_accuracy, ResidualRecord};

use crate::config::RunConfig;
use crate::forecast::{load_windows, FailureRow, NaRow, FAILURES_FILE, NA_FILE};
use crate::report::{self, OmittedRow, ScoreRow};
use crate::workspace::{read_csv, read_jsonl, write_csv_with_header, Workspace};
use crate::Invalid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateSummary {
    pub systems: usize,
    pub perturbations: usize,
    pub windows: usize,
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    window_id: &'a str,
    system: &'a str,
    perturbation: PerturbationId,
    entity_id: &'a str,
    industry: &'a str,
    r_max: f64,
    smape: f64,
    mase: Option<f64>,
    sign_hit: bool,
}

#[derive(Serialize)]
struct AccuracyRow<'a> {
    system: &'a str,
    perturbation: PerturbationId,
    windows: usize,
    smape_mean: f64,
    smape_std: f64,
    mase_mean: Option<f64>,
    mase_std: Option<f64>,
    mase_flagged: usize,
    sign_accuracy: f64,
}

#[derive(Serialize)]
struct WrsRow<'a> {
    system: &'a str,
    perturbation: PerturbationId,
    attribute: &'static str,
    score: f64,
    pairs_tested: usize,
    pairs_skipped: usize,
}

#[derive(Serialize)]
struct CausalRow<'a> {
    system: &'a str,
    perturbation: PerturbationId,
    confounder: Confounder,
    distribution: &'a str,
    ape_o: f64,
    ape_m: f64,
    pie_percent: f64,
    matched_pairs: usize,
    dropped_treated: usize,
}

#[derive(Serialize)]
struct CausalFailureRow<'a> {
    system: &'a str,
    perturbation: PerturbationId,
    distribution: &'a str,
    reason: &'a str,
}

type Groups<'a> = BTreeMap<(String, PerturbationId), Vec<&'a ResidualRecord>>;

fn score(metric: &str, system: &str, p: PerturbationId, score: f64) -> ScoreRow {
    ScoreRow {
        metric: metric.into(),
        perturbation: p,
        system: system.into(),
        score,
    }
}

fn omit(metric: &str, system: &str, p: PerturbationId, reason: impl Into<String>) -> OmittedRow {
    OmittedRow {
        metric: metric.into(),
        perturbation: p,
        system: system.into(),
        reason: reason.into(),
    }
}

fn distribution_specs(cfg: &RunConfig, entities: &BTreeMap<String, String>, pool: usize) -> Vec<DistributionSpec> {
    let size = ((pool as f64 * cfg.causal.sample_fraction).floor() as usize).max(1);
    let seed = cfg.causal_seed();
    if cfg.causal.distributions.is_empty() {
        let mut specs = default_specs(entities, size, seed, cfg.causal.include_uniform);
        for s in specs.iter_mut().filter(|s| s.tag != "D0") {
            s.treated_weight = cfg.causal.treated_weight;
            s.control_weight = cfg.causal.control_weight;
        }
        specs
    } else {
        cfg.causal
            .distributions
            .iter()
            .map(|d| DistributionSpec {
                tag: d.tag.clone(),
                confounder: d.confounder,
                favored_value: d.favored_value.clone(),
                treated_weight: d.treated_weight,
                control_weight: d.control_weight,
                sample_size: size,
                seed,
            })
            .collect()
    }
}

/// `(system, perturbation, confounder, score, tests, skipped)`
type WrsCell = (String, PerturbationId, &'static str, f64, usize, usize);

fn wrs_scores(
    cfg: &RunConfig,
    groups: &Groups<'_>,
    industries: &BTreeMap<String, String>,
    scores: &mut Vec<ScoreRow>,
    omitted: &mut Vec<OmittedRow>,
) -> anyhow::Result<Vec<WrsCell>> {
    let wcfg = WrsConfig {
        cis: cfg.metrics.cis.clone(),
        weights: cfg.metrics.weights.clone(),
        eps: cfg.metrics.eps,
    };
    let industry_pairs = all_pairs(industries.values().map(String::as_str));
    let company_pairs = company_pairs_within_industry(industries);
    let mut rows = Vec::new();
    for ((system, p), recs) in groups {
        for (metric, attribute, pairs) in [
            ("WRS_I", "Industry", &industry_pairs),
            ("WRS_C", "Company", &company_pairs),
        ] {
            let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for r in recs {
                let class = if attribute == "Industry" {
                    &r.industry
                } else {
                    &r.entity_id
                };
                by_class.entry(class.clone()).or_default().push(r.r_max);
            }
            let out = wrs(&by_class, pairs, &wcfg)?;
            rows.push((
                system.clone(),
                *p,
                attribute,
                out.score,
                out.tests.len(),
                out.skipped.len(),
            ));
            if out.tests.is_empty() {
                omitted.push(omit(metric, system, *p, "no class pair with two or more windows each"));
            } else {
                scores.push(score(metric, system, *p, out.score));
            }
        }
    }
    Ok(rows)
}

pub fn run(cfg: &RunConfig, ws: &Workspace) -> anyhow::Result<RateSummary> {
    let windows = load_windows(cfg, ws)?;
    let by_id: BTreeMap<&str, &WindowSample> = windows.values().flatten().map(|w| (w.window_id.as_str(), w)).collect();
    let mut entities: BTreeMap<String, String> = BTreeMap::new();
    for w in windows.values().flatten() {
        entities
            .entry(w.entity_id.clone())
            .or_insert_with(|| w.industry.clone());
    }

    let na_path = ws.forecasts().join(NA_FILE);
    if !na_path.is_file() {
        return Err(Invalid(format!("{} missing; run `tsrate forecast` first", na_path.display())).into());
    }
    let na: Vec<NaRow> = read_csv(&na_path)?;
    let failures: Vec<FailureRow> = read_csv(&ws.forecasts().join(FAILURES_FILE))?;

    let mut system_ids: Vec<String> = cfg.systems.clone();
    system_ids.extend(cfg.external.iter().map(|e| e.system_id.clone()));
    let mut forecasts: Vec<ForecastRecord> = Vec::new();
    let mut present = Vec::new();
    let mut omitted = Vec::new();
    for id in &system_ids {
        let path = ws.forecast_file(id);
        if path.is_file() {
            forecasts.extend(read_jsonl::<ForecastRecord>(&path)?);
            present.push(id.clone());
        } else {
            let reason = failures
                .iter()
                .find(|f| &f.system == id)
                .map_or("no forecasts found".to_string(), |f| {
                    format!("import failed: {}", f.reason)
                });
            for metric in report::METRIC_FAMILIES {
                for &p in windows.keys() {
                    omitted.push(omit(metric, id, p, reason.clone()));
                }
            }
        }
    }
    for row in &na {
        for metric in report::METRIC_FAMILIES {
            omitted.push(omit(metric, &row.system, row.perturbation, row.reason.clone()));
        }
    }

    let residuals: Vec<ResidualRecord> = forecasts
        .par_iter()
        .map(|f| -> anyhow::Result<ResidualRecord> {
            let w = by_id
                .get(f.window_id.as_str())
                .ok_or_else(|| Invalid(format!("forecast {} of {} has no window", f.window_id, f.system_id)))?;
            Ok(residual_record(w, f, cfg.metrics.rmax_mode)?)
        })
        .collect::<anyhow::Result<_>>()?;

    let mut groups: Groups<'_> = BTreeMap::new();
    for r in &residuals {
        groups.entry((r.system_id.clone(), r.perturbation)).or_default().push(r);
    }

    ws.reset(&ws.analysis())?;
    let analysis = ws.analysis();
    let residual_rows: Vec<ResidualRow> = residuals
        .iter()
        .map(|r| ResidualRow {
            window_id: &r.window_id,
            system: &r.system_id,
            perturbation: r.perturbation,
            entity_id: &r.entity_id,
            industry: &r.industry,
            r_max: r.r_max,
            smape: r.smape,
            mase: r.mase,
            sign_hit: r.sign_hit,
        })
        .collect();
    write_csv_with_header(
        &analysis.join("residuals.csv"),
        &[
            "window_id",
            "system",
            "perturbation",
            "entity_id",
            "industry",
            "r_max",
            "smape",
            "mase",
            "sign_hit",
        ],
        &residual_rows,
    )?;

    let mut scores = Vec::new();

    let mut accuracy = Vec::new();
    for ((system, p), recs) in &groups {
        let Some(s) = summarize_accuracy(recs) else { continue };
        scores.push(score("SMAPE", system, *p, s.smape_mean));
        match s.mase_mean {
            Some(m) => scores.push(score("MASE", system, *p, m)),
            None => omitted.push(omit("MASE", system, *p, "every input window is constant")),
        }
        scores.push(score("SignAcc", system, *p, s.sign_accuracy));
        accuracy.push(AccuracyRow {
            system,
            perturbation: *p,
            windows: s.windows,
            smape_mean: s.smape_mean,
            smape_std: s.smape_std,
            mase_mean: s.mase_mean,
            mase_std: s.mase_std,
            mase_flagged: s.mase_flagged,
            sign_accuracy: s.sign_accuracy,
        });
    }
    write_csv_with_header(
        &analysis.join("accuracy.csv"),
        &[
            "system",
            "perturbation",
            "windows",
            "smape_mean",
            "smape_std",
            "mase_mean",
            "mase_std",
            "mase_flagged",
            "sign_accuracy",
        ],
        &accuracy,
    )?;

    let wrs_rows = wrs_scores(cfg, &groups, &entities, &mut scores, &mut omitted)?;
    let wrs_rows: Vec<WrsRow> = wrs_rows
        .iter()
        .map(|(s, p, a, score, t, k)| WrsRow {
            system: s,
            perturbation: *p,
            attribute: a,
            score: *score,
            pairs_tested: *t,
            pairs_skipped: *k,
        })
        .collect();
    write_csv_with_header(
        &analysis.join("wrs.csv"),
        &[
            "system",
            "perturbation",
            "attribute",
            "score",
            "pairs_tested",
            "pairs_skipped",
        ],
        &wrs_rows,
    )?;

    // causal: each Pi against P0, per system
    let all: Vec<&ResidualRecord> = residuals.iter().collect();
    let mut tasks = Vec::new();
    for system in &present {
        let Some(control) = groups.get(&(system.clone(), PerturbationId::P0)) else {
            continue;
        };
        for &p in windows.keys().filter(|p| **p != PerturbationId::P0) {
            if let Some(treated) = groups.get(&(system.clone(), p)) {
                let specs = distribution_specs(cfg, &entities, control.len() + treated.len());
                tasks.push((system.clone(), p, specs));
            }
        }
    }
    let summaries: Vec<CausalSummary> = tasks
        .par_iter()
        .map(|(system, p, specs)| analyze(&all, system, *p, specs))
        .collect();

    let mut causal_rows = Vec::new();
    let mut causal_failures = Vec::new();
    for s in &summaries {
        for (metric, conf, pie) in [
            ("PIE_I", Confounder::Industry, true),
            ("PIE_C", Confounder::Company, true),
            ("APE_I", Confounder::Industry, false),
            ("APE_C", Confounder::Company, false),
        ] {
            let v = if pie {
                s.max_pie(Some(conf))
            } else {
                s.max_ape(Some(conf))
            };
            match v {
                Some(v) => scores.push(score(metric, &s.system_id, s.perturbation, v)),
                None => omitted.push(omit(
                    metric,
                    &s.system_id,
                    s.perturbation,
                    format!("no {conf} distribution succeeded"),
                )),
            }
        }
        for r in &s.results {
            causal_rows.push(CausalRow {
                system: &r.system_id,
                perturbation: r.perturbation,
                confounder: r.confounder,
                distribution: &r.distribution,
                ape_o: r.ape_o,
                ape_m: r.ape_m,
                pie_percent: r.pie_percent,
                matched_pairs: r.matched_pairs,
                dropped_treated: r.dropped_treated,
            });
        }
        for f in &s.failures {
            causal_failures.push(CausalFailureRow {
                system: &s.system_id,
                perturbation: s.perturbation,
                distribution: &f.distribution,
                reason: &f.reason,
            });
        }
    }
    write_csv_with_header(
        &analysis.join("causal.csv"),
        &[
            "system",
            "perturbation",
            "confounder",
            "distribution",
            "ape_o",
            "ape_m",
            "pie_percent",
            "matched_pairs",
            "dropped_treated",
        ],
        &causal_rows,
    )?;
    write_csv_with_header(
        &analysis.join("causal_failures.csv"),
        &["system", "perturbation", "distribution", "reason"],
        &causal_failures,
    )?;

    report::sort_scores(&mut scores);
    report::sort_omitted(&mut omitted);
    omitted.dedup();
    report::write_scores(ws, &scores, &omitted)?;
    report::write_reports(ws, &scores, &omitted, cfg.rating.levels)?;

    let rated: BTreeSet<&str> = scores.iter().map(|s| s.system.as_str()).collect();
    Ok(RateSummary {
        systems: rated.len(),
        perturbations: windows.len(),
        windows: windows.get(&PerturbationId::P0).map_or(0, Vec::len),
    })
}
