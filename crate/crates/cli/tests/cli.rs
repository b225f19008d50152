//! Drives the `tsrate` binary on small synthetic inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

const ENTITIES: [(&str, &str); 3] = [("AAA", "tech"), ("BBB", "tech"), ("CCC", "energy")];
const DAYS: usize = 110;

fn write_inputs(dir: &Path, meta_rows: &[(&str, &str)]) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut prices = String::from("date,entity_id,adj_close\n");
    for (e, _) in ENTITIES {
        let mut p = rng.random_range(50.0..150.0);
        for d in 0..DAYS {
            p *= (0.01 * rng.sample::<f64, _>(StandardNormal)).exp();
            prices.push_str(&format!("2024-{:02}-{:02},{e},{p:.4}\n", d / 28 + 1, d % 28 + 1));
        }
    }
    fs::write(dir.join("prices.csv"), prices).unwrap();
    let meta: String = meta_rows.iter().map(|(e, i)| format!("{e},{i}\n")).collect();
    fs::write(dir.join("meta.csv"), format!("entity_id,industry\n{meta}")).unwrap();
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        format!("seed = 3\n{extra}\n[data]\nprices = \"prices.csv\"\nmetadata = \"meta.csv\"\nworkspace = \"ws\"\n"),
    )
    .unwrap();
    path
}

fn tsrate(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tsrate"));
    cmd.env_remove("TSRATE_WORKSPACE");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap()
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            headers
                .iter()
                .zip(r.unwrap().iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Persistence forecasts for every manifest window, as an external system
/// would produce from the exchange directory.
fn write_external(exchange: &Path, out: &Path) -> usize {
    let manifest = fs::read_to_string(exchange.join("manifest.jsonl")).unwrap();
    let mut body = String::new();
    let mut n = 0;
    for line in manifest.lines() {
        let rec: Value = serde_json::from_str(line).unwrap();
        let inputs = read_csv(&exchange.join(rec["input_csv"].as_str().unwrap()));
        let last: f64 = inputs.last().unwrap()["value"].parse().unwrap();
        let line = serde_json::json!({
            "window_id": rec["window_id"],
            "perturbation": rec["perturbation"],
            "predictions": vec![last; 20],
        });
        body.push_str(&format!("{line}\n"));
        n += 1;
    }
    fs::write(out, body).unwrap();
    n
}

#[test]
fn full_workflow_with_external_system() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &ENTITIES);
    let extra = "[[external]]\nsystem_id = \"S_x\"\npredictions = \"ext.jsonl\"\n\n[[external]]\nsystem_id = \"S_missing\"\npredictions = \"nope.jsonl\"\n";
    let config = write_config(dir.path(), extra);
    let ws = dir.path().join("ws");

    let windows_per_p = ENTITIES.len() * (DAYS - 100 + 1);
    let summary = ok(tsrate(&["prepare"], Some(&config)));
    assert_eq!(
        summary.trim(),
        format!(
            "prepared perturbations=6 windows={} images={} skipped_entities=0",
            6 * windows_per_p,
            4 * windows_per_p
        )
    );
    let prepared = files(&ws);
    ok(tsrate(&["prepare"], Some(&config)));
    assert_eq!(files(&ws), prepared, "re-running prepare changed the workspace");

    let exported = write_external(&ws.join("windows/exchange"), &dir.path().join("ext.jsonl"));
    assert_eq!(exported, 6 * windows_per_p);

    // S_a skips P3..P5; the missing external file is recorded, not fatal.
    let summary = ok(tsrate(&["forecast"], Some(&config)));
    let records = windows_per_p * (6 + 3 + 6 + 6);
    assert_eq!(
        summary.trim(),
        format!("forecast systems=4 records={records} na=3 failed=1")
    );
    let na = read_csv(&ws.join("forecasts/na.csv"));
    let na: Vec<(&str, &str)> = na
        .iter()
        .map(|r| (r["system"].as_str(), r["perturbation"].as_str()))
        .collect();
    assert_eq!(na, [("S_a", "P3"), ("S_a", "P4"), ("S_a", "P5")]);
    let failures = read_csv(&ws.join("forecasts/failures.csv"));
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["system"], "S_missing");

    let summary = ok(tsrate(&["rate"], Some(&config)));
    assert_eq!(
        summary.trim(),
        format!("systems=4 perturbations=6 windows={windows_per_p}")
    );
    let ratings = read_csv(&ws.join("reports/ratings.csv"));
    assert!(ratings
        .iter()
        .all(|r| (1..=3).contains(&r["rating"].parse::<usize>().unwrap())));
    let mase_p0: BTreeMap<&str, &str> = ratings
        .iter()
        .filter(|r| r["metric"] == "MASE" && r["perturbation"] == "P0")
        .map(|r| (r["system"].as_str(), r["rating"].as_str()))
        .collect();
    assert_eq!(mase_p0.len(), 4);
    assert_eq!(mase_p0["S_b"], "3");
    assert!(!ratings
        .iter()
        .any(|r| r["system"] == "S_a" && r["perturbation"] == "P4"));

    // `report` rebuilds the same tables from the persisted scores.
    let md = fs::read_to_string(ws.join("reports/ratings.md")).unwrap();
    let before = files(&ws.join("reports"));
    let printed = ok(tsrate(&["report"], Some(&config)));
    assert_eq!(printed, md);
    assert_eq!(files(&ws.join("reports")), before);
}

#[test]
fn missing_metadata_entity_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &ENTITIES[..2]);
    let config = write_config(dir.path(), "");
    let out = tsrate(&["prepare"], Some(&config));
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["exit_code"], 2);
    assert_eq!(rec["error"], "metadata");
    assert!(rec["message"].as_str().unwrap().contains("CCC"), "{rec}");
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &ENTITIES);

    let config = write_config(dir.path(), "colour = \"blue\"");
    let out = tsrate(&["prepare"], Some(&config));
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("colour"));

    let config = write_config(dir.path(), "[rating]\nlevels = 0\n");
    assert_eq!(tsrate(&["prepare"], Some(&config)).status.code(), Some(2));

    let out = tsrate(&["prepare"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("--config"));

    let config = write_config(dir.path(), "");
    assert_eq!(
        tsrate(&["--threads", "0", "prepare"], Some(&config)).status.code(),
        Some(2)
    );

    // forecasting before prepare names the missing stage output
    let out = tsrate(&["forecast"], Some(&config));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rates_published_scores_directly() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(
        &scores,
        "metric,perturbation,system,score\n\
         MASE,P0,S_v1,3.68\nMASE,P0,S_a,3.79\nMASE,P0,S_v2,3.89\nMASE,P0,S_r,86.45\nMASE,P0,S_b,947.56\n\
         PIE_I,P3,S_v2,224.98\nPIE_I,P3,S_v1,276.86\nPIE_I,P3,S_r,3560.94\nPIE_I,P3,S_b,7489.48\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let md = ok(tsrate(
        &[
            "rate",
            "--from-scores",
            scores.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    ));
    assert!(md.contains("MASE"));
    assert_eq!(fs::read_to_string(out_dir.join("ratings.md")).unwrap(), md);

    let rated: BTreeMap<(String, String), String> = read_csv(&out_dir.join("ratings.csv"))
        .into_iter()
        .map(|r| ((r["metric"].clone(), r["system"].clone()), r["rating"].clone()))
        .collect();
    let get = |m: &str, s: &str| rated[&(m.to_string(), s.to_string())].as_str();
    let mase: Vec<&str> = ["S_v1", "S_a", "S_v2", "S_r", "S_b"]
        .iter()
        .map(|s| get("MASE", s))
        .collect();
    assert_eq!(mase, ["1", "1", "2", "2", "3"]);
    let pie: Vec<&str> = ["S_v2", "S_v1", "S_r", "S_b"].iter().map(|s| get("PIE_I", s)).collect();
    assert_eq!(pie, ["1", "1", "2", "3"]);

    let two = ok(tsrate(
        &["rate", "--from-scores", scores.to_str().unwrap(), "--levels", "2"],
        None,
    ));
    assert_ne!(two, md);

    fs::write(
        &scores,
        "metric,perturbation,system,score\nMASE,P0,S_a,1\nMASE,P0,S_a,2\n",
    )
    .unwrap();
    let out = tsrate(&["rate", "--from-scores", scores.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bare_config_name_resolves_against_cwd() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &ENTITIES);
    write_config(dir.path(), "");
    let out = Command::new(env!("CARGO_BIN_EXE_tsrate"))
        .env_remove("TSRATE_WORKSPACE")
        .current_dir(dir.path())
        .args(["-c", "run.toml", "prepare"])
        .output()
        .unwrap();
    ok(out);
    let lock = fs::read_to_string(dir.path().join("ws/run.lock")).unwrap();
    assert!(
        lock.contains(&format!("{}", dir.path().join("prices.csv").display())),
        "{lock}"
    );
}
