//! Library-level pass over the whole workflow on a small synthetic table.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tsrate_core::causal::default_specs;
use tsrate_core::data::{make_perturbed_windows, PerturbationId};
use tsrate_core::forecast::exchange::{export_windows_for_external, import_external_predictions, read_manifest};
use tsrate_core::forecast::{ArimaForecaster, BiasedConfig, BiasedForecaster, RandomConfig, RandomForecaster};
use tsrate_core::metrics::{all_pairs, residual_record, wrs, RmaxMode};
use tsrate_core::perturb::{apply_drop_to_zero, apply_saturation, apply_single_pixel};
use tsrate_core::specgram::{render_image, series_stripe};
use tsrate_core::{
    analyze, load_price_table, make_windows, Forecaster, RatingTable, ResidualRecord, SpectroImage, WrsConfig,
};

fn write_table(dir: &Path, days: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut prices = String::from("date,entity_id,adj_close\n");
    let entities = [("A", "x"), ("B", "x"), ("C", "y"), ("D", "y")];
    for (e, _) in entities {
        let mut p: f64 = rng.random_range(40.0..120.0);
        for d in 0..days {
            p *= (0.012 * rng.sample::<f64, _>(StandardNormal)).exp();
            prices.push_str(&format!("2024-{:02}-{:02},{e},{p:.4}\n", d / 28 + 1, d % 28 + 1));
        }
    }
    let meta: String = entities.iter().map(|(e, i)| format!("{e},{i}\n")).collect();
    fs::write(dir.join("p.csv"), prices).unwrap();
    fs::write(dir.join("m.csv"), format!("entity_id,industry\n{meta}")).unwrap();
}

#[test]
fn numeric_pipeline_produces_ratings() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), 140);
    let table = load_price_table(&dir.path().join("p.csv"), &dir.path().join("m.csv")).unwrap();
    assert_eq!(table.entities.len(), 4);

    let p0 = make_windows(&table, 80, 20, 1).unwrap().windows;
    let zeroed = table.map_prices(|v| apply_drop_to_zero(v, 80));
    let p1 = make_perturbed_windows(&table, &zeroed, 80, 20, 1, PerturbationId::P1)
        .unwrap()
        .windows;
    assert_eq!(p0.len(), 4 * 41);
    assert_eq!(p1.len(), p0.len());
    for (a, b) in p0.iter().zip(&p1) {
        assert_eq!(a.truth, b.truth);
        assert_eq!(b.input.iter().filter(|v| **v == 0.0).count(), 1);
    }

    let systems: Vec<Box<dyn Forecaster>> = vec![
        Box::new(ArimaForecaster::new(2, 2, 20)),
        Box::new(BiasedForecaster {
            config: BiasedConfig::new("A", "B"),
        }),
        Box::new(RandomForecaster::new(RandomConfig { margin: 100.0, seed: 5 }, &table).unwrap()),
    ];
    let mut records: Vec<ResidualRecord> = Vec::new();
    for s in &systems {
        for w in p0.iter().chain(&p1) {
            let f = s.predict(w).unwrap();
            assert_eq!(f.predictions.len(), 20);
            records.push(residual_record(w, &f, RmaxMode::Absolute).unwrap());
        }
    }
    // S_b is exact on its favoured entity whatever the input.
    assert!(records
        .iter()
        .filter(|r| r.system_id == "S_b" && r.entity_id == "A")
        .all(|r| r.r_max == 0.0));

    let refs: Vec<&ResidualRecord> = records.iter().collect();
    let specs = default_specs(&table.industries(), 40, 9, false);
    let mut pie = BTreeMap::new();
    let mut wrs_scores = BTreeMap::new();
    for s in &systems {
        let id = s.system_id().to_string();
        let summary = analyze(&refs, &id, PerturbationId::P1, &specs);
        assert!(summary.failures.is_empty(), "{:?}", summary.failures);
        assert_eq!(summary.results.len(), specs.len());
        pie.insert(id.clone(), summary.max_pie(None).unwrap());

        let mut by_industry: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in refs
            .iter()
            .filter(|r| r.system_id == id && r.perturbation == PerturbationId::P0)
        {
            by_industry.entry(r.industry.clone()).or_default().push(r.r_max);
        }
        let classes: Vec<&str> = by_industry.keys().map(String::as_str).collect();
        let out = wrs(&by_industry, &all_pairs(classes), &WrsConfig::default()).unwrap();
        wrs_scores.insert(id, out.score);
    }
    // Offsets of 0 and 200 against 800 split the industries apart.
    assert!(wrs_scores["S_b"] > 0.0);

    let table = RatingTable::build("PIE", 3, &[(PerturbationId::P1, pie)].into()).unwrap();
    let ratings = &table.rows[0].ratings;
    let mut levels: Vec<usize> = ratings.values().copied().collect();
    levels.sort();
    assert_eq!(levels, [1, 2, 3]);
}

#[test]
fn images_and_exchange_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path(), 105);
    let table = load_price_table(&dir.path().join("p.csv"), &dir.path().join("m.csv")).unwrap();
    let windows = make_windows(&table, 80, 20, 1).unwrap().windows;

    let w = &windows[3];
    let img = render_image(w, &series_stripe(&w.input).unwrap(), 5.0).unwrap();
    let path = dir.path().join(img.file_name());
    img.write_png(&path).unwrap();
    let back = SpectroImage::read_png(&path, img.provenance.clone()).unwrap();
    assert_eq!(back, img);
    assert_eq!(apply_single_pixel(&back).unwrap().pixel_diff_count(&img), 1);
    assert!(apply_saturation(&back, 10.0).unwrap().pixel_diff_count(&img) > 0);

    let images: BTreeMap<String, String> = [(w.window_id.clone(), format!("../{}", img.file_name()))].into();
    let out = dir.path().join("exchange");
    let manifest = export_windows_for_external(&windows, &images, &out).unwrap();
    let rows = read_manifest(&manifest).unwrap();
    assert_eq!(rows.len(), windows.len());
    assert_eq!(rows.iter().filter(|r| r.image_png.is_some()).count(), 1);

    // An external system may answer for a subset of windows.
    let mut body = String::new();
    for r in rows.iter().take(5) {
        let preds = vec![1.5; 20];
        body.push_str(&format!(
            "{}\n",
            serde_json::json!({"window_id": r.window_id, "perturbation": r.perturbation, "predictions": preds})
        ));
    }
    let pred_path = dir.path().join("ext.jsonl");
    fs::write(&pred_path, &body).unwrap();
    let known: BTreeMap<String, PerturbationId> =
        windows.iter().map(|w| (w.window_id.clone(), w.perturbation)).collect();
    let imported = import_external_predictions(&pred_path, "S_x", &known, 20).unwrap();
    assert_eq!(imported.len(), 5);
    assert!(imported
        .iter()
        .all(|r| r.system_id == "S_x" && r.predictions.len() == 20));

    fs::write(&pred_path, format!("{body}{}", body.lines().next().unwrap())).unwrap();
    assert!(import_external_predictions(&pred_path, "S_x", &known, 20).is_err());
    assert!(import_external_predictions(&pred_path, "S_x", &known, 19).is_err());

    let mut nulls = vec![serde_json::json!(1.5); 20];
    nulls[19] = serde_json::Value::Null;
    let line = serde_json::json!({"window_id": rows[0].window_id, "perturbation": "P0", "predictions": nulls});
    fs::write(&pred_path, format!("{line}\n")).unwrap();
    assert!(import_external_predictions(&pred_path, "S_x", &known, 20).is_err());
}
