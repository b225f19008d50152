//! Synthetic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tsrate_core::data::{EntitySeries, EntityTable};

/// Geometric random-walk prices, entities `E0..` spread over
/// `industries` labels.
pub fn synthetic_table(entities: usize, industries: usize, days: usize, seed: u64) -> EntityTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = (0..entities)
        .map(|e| {
            let mut price = 50.0 + 10.0 * e as f64;
            let prices = (0..days)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    price *= (0.01 * z).exp();
                    price
                })
                .collect();
            EntitySeries {
                entity_id: format!("E{e}"),
                industry: format!("I{}", e % industries.max(1)),
                dates: (0..days).map(day).collect(),
                prices,
            }
        })
        .collect();
    EntityTable::new(series).expect("synthetic table is valid")
}

/// ISO date `i` days after 2020-01-01 on a 28-day-month calendar; only
/// ordering matters to the pipeline.
fn day(i: usize) -> String {
    format!("{:04}-{:02}-{:02}", 2020 + i / 336, 1 + (i / 28) % 12, 1 + i % 28)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let t = synthetic_table(6, 3, 200, 1);
        assert_eq!(t.entities.len(), 6);
        assert_eq!(
            t.industries().values().collect::<std::collections::BTreeSet<_>>().len(),
            3
        );
        assert!(t.entities.iter().all(|e| e.len() == 200));
    }
}
