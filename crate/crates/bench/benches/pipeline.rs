use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tsrate_bench::synthetic_table;
use tsrate_core::causal::{analyze, default_specs};
use tsrate_core::data::{window_id, PerturbationId};
use tsrate_core::forecast::{select_arima_order, ArimaForecaster};
use tsrate_core::perturb::apply_saturation;
use tsrate_core::specgram::{cwt, default_scales, render_image, series_stripe};
use tsrate_core::{assign_rating, make_windows, ResidualRecord};

fn spectrogram(c: &mut Criterion) {
    let table = synthetic_table(1, 1, 120, 1);
    let w = make_windows(&table, 80, 20, 1).unwrap().windows.remove(0);
    let scales = default_scales(80).unwrap();
    c.bench_function("cwt_80x112", |b| {
        b.iter(|| cwt(black_box(&w.input), &scales, 5.0).unwrap())
    });
    let stripe = series_stripe(&w.input).unwrap();
    c.bench_function("render_image", |b| {
        b.iter(|| render_image(black_box(&w), &stripe, 5.0).unwrap())
    });
    let img = render_image(&w, &stripe, 5.0).unwrap();
    c.bench_function("saturation_x10", |b| {
        b.iter(|| apply_saturation(black_box(&img), 10.0).unwrap())
    });
}

fn arima(c: &mut Criterion) {
    let table = synthetic_table(1, 1, 120, 2);
    let input = make_windows(&table, 80, 20, 1).unwrap().windows.remove(0).input;
    let mut g = c.benchmark_group("arima");
    for max in [1usize, 3] {
        g.bench_with_input(BenchmarkId::new("select_order", max), &max, |b, &m| {
            b.iter(|| select_arima_order(black_box(&input), m, m).unwrap())
        });
    }
    let f = ArimaForecaster::new(3, 3, 20);
    g.bench_function("forecast_window", |b| {
        b.iter(|| f.forecast_input(black_box(&input)).unwrap())
    });
    g.finish();
}

fn residual_pool(entities: usize, per_entity: usize, seed: u64) -> Vec<ResidualRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for e in 0..entities {
        for t in 0..per_entity {
            for p in [PerturbationId::P0, PerturbationId::P1] {
                let y = e as f64 + rng.random_range(0.0..1.0) + if p == PerturbationId::P1 { 2.0 } else { 0.0 };
                out.push(ResidualRecord {
                    window_id: window_id(&format!("E{e}"), t, p),
                    system_id: "S".into(),
                    perturbation: p,
                    entity_id: format!("E{e}"),
                    industry: format!("I{}", e % 3),
                    residuals: vec![y],
                    r_max: y,
                    smape: 0.0,
                    mase: None,
                    sign_hit: false,
                });
            }
        }
    }
    out
}

fn causal(c: &mut Criterion) {
    let pool = residual_pool(6, 400, 3);
    let refs: Vec<&ResidualRecord> = pool.iter().collect();
    let industries: BTreeMap<String, String> = (0..6).map(|e| (format!("E{e}"), format!("I{}", e % 3))).collect();
    let specs = default_specs(&industries, refs.len() / 2, 4, false);
    c.bench_function("causal_analyze_9_specs", |b| {
        b.iter(|| analyze(black_box(&refs), "S", PerturbationId::P1, &specs))
    });
}

fn rating(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scores: BTreeMap<String, f64> = (0..1000)
        .map(|i| (format!("S{i}"), rng.random_range(0.0..100.0)))
        .collect();
    c.bench_function("assign_rating_1000", |b| {
        b.iter(|| assign_rating(black_box(&scores), 3).unwrap())
    });
}

criterion_group!(benches, spectrogram, arima, causal, rating);
criterion_main!(benches);
