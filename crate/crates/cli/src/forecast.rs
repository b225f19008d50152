//! `forecast`: run built-in systems over applicable perturbations and
//! import external predictions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tsrate_core::data::{load_price_table, EntityTable, PerturbationId, WindowSample};
use tsrate_core::forecast::exchange::import_external_predictions;
use tsrate_core::forecast::{
    ArimaForecaster, BiasedConfig, BiasedForecaster, ForecastRecord, Forecaster, RandomConfig, RandomForecaster,
    ARIMA_ID, BIASED_ID,
};

use crate::config::RunConfig;
use crate::workspace::{read_jsonl, write_csv_with_header, write_jsonl, Workspace};
use crate::Invalid;

/// A (system, perturbation) cell with no predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaRow {
    pub system: String,
    pub perturbation: PerturbationId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub system: String,
    pub reason: String,
}

pub const NA_FILE: &str = "na.csv";
pub const FAILURES_FILE: &str = "failures.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForecastSummary {
    pub systems: usize,
    pub records: usize,
    pub na: usize,
    pub failed: usize,
}

pub fn load_windows(cfg: &RunConfig, ws: &Workspace) -> anyhow::Result<BTreeMap<PerturbationId, Vec<WindowSample>>> {
    cfg.perturbations
        .iter()
        .map(|&p| {
            let path = ws.window_file(p);
            if !path.is_file() {
                return Err(Invalid(format!(
                    "{} missing; run `tsrate prepare` with this config first",
                    path.display()
                ))
                .into());
            }
            Ok((p, read_jsonl(&path)?))
        })
        .collect()
}

fn biased_config(cfg: &RunConfig, table: &EntityTable) -> anyhow::Result<BiasedConfig> {
    let ids: Vec<&str> = table.entities.iter().map(|e| e.entity_id.as_str()).collect();
    let pick = |set: &Option<String>, i: usize| -> anyhow::Result<String> {
        match set {
            Some(e) if ids.contains(&e.as_str()) => Ok(e.clone()),
            Some(e) => Err(Invalid(format!("biased: entity {e} not in the price table")).into()),
            None => Ok(ids.get(i).or(ids.first()).map(|s| s.to_string()).unwrap_or_default()),
        }
    };
    let mut b = BiasedConfig::new(pick(&cfg.biased.favored_zero, 0)?, pick(&cfg.biased.favored_const, 1)?);
    b.const_offset = cfg.biased.const_offset;
    b.other_offset = cfg.biased.other_offset;
    b.validate()?;
    Ok(b)
}

fn builtins(cfg: &RunConfig, table: &EntityTable) -> anyhow::Result<Vec<Box<dyn Forecaster>>> {
    cfg.systems
        .iter()
        .map(|s| -> anyhow::Result<Box<dyn Forecaster>> {
            Ok(match s.as_str() {
                ARIMA_ID => Box::new(ArimaForecaster::new(cfg.arima.p_max, cfg.arima.q_max, cfg.windows.d)),
                BIASED_ID => Box::new(BiasedForecaster {
                    config: biased_config(cfg, table)?,
                }),
                _ => Box::new(RandomForecaster::new(
                    RandomConfig {
                        margin: cfg.random.margin,
                        seed: cfg.random_seed(),
                    },
                    table,
                )?),
            })
        })
        .collect()
}

pub fn run(cfg: &RunConfig, ws: &Workspace) -> anyhow::Result<ForecastSummary> {
    let windows = load_windows(cfg, ws)?;
    cfg.require_inputs()?;
    let table = load_price_table(&cfg.data.prices, &cfg.data.metadata)?;
    let systems = builtins(cfg, &table)?;
    ws.reset(&ws.forecasts())?;

    let mut summary = ForecastSummary {
        systems: 0,
        records: 0,
        na: 0,
        failed: 0,
    };
    let mut na = Vec::new();
    let mut failures = Vec::new();
    for system in &systems {
        let id = system.system_id();
        let mut records: Vec<ForecastRecord> = Vec::new();
        for (&p, ws_p) in &windows {
            if !system.applies_to(p) {
                na.push(NaRow {
                    system: id.to_string(),
                    perturbation: p,
                    reason: "NA: system does not consume image-space inputs".into(),
                });
                continue;
            }
            let preds = ws_p
                .par_iter()
                .map(|w| system.predict(w))
                .collect::<Result<Vec<_>, _>>()?;
            records.extend(preds);
        }
        records.sort_by(|a, b| a.window_id.cmp(&b.window_id));
        summary.records += records.len();
        summary.systems += 1;
        write_jsonl(&ws.forecast_file(id), &records)?;
    }

    let known: BTreeMap<String, PerturbationId> = windows
        .values()
        .flatten()
        .map(|w| (w.window_id.clone(), w.perturbation))
        .collect();
    for ext in &cfg.external {
        let imported = if ext.predictions.is_file() {
            import_external_predictions(&ext.predictions, &ext.system_id, &known, cfg.windows.d)
                .map_err(|e| e.to_string())
        } else {
            Err(format!("predictions file {} does not exist", ext.predictions.display()))
        };
        match imported {
            Ok(records) => {
                for &p in windows.keys() {
                    if !records.iter().any(|r| r.perturbation == p) {
                        na.push(NaRow {
                            system: ext.system_id.clone(),
                            perturbation: p,
                            reason: "NA: no predictions supplied".into(),
                        });
                    }
                }
                summary.records += records.len();
                summary.systems += 1;
                write_jsonl(&ws.forecast_file(&ext.system_id), &records)?;
            }
            Err(reason) => {
                log::warn!("external system {} skipped: {reason}", ext.system_id);
                failures.push(FailureRow {
                    system: ext.system_id.clone(),
                    reason,
                });
            }
        }
    }
    summary.na = na.len();
    summary.failed = failures.len();
    write_csv_with_header(
        &ws.forecasts().join(NA_FILE),
        &["system", "perturbation", "reason"],
        &na,
    )?;
    write_csv_with_header(&ws.forecasts().join(FAILURES_FILE), &["system", "reason"], &failures)?;
    Ok(summary)
}
