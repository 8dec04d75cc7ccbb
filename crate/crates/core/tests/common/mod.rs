#![allow(dead_code)]

use rand::Rng as _;
use tritrain::rng::seeded;
use tritrain::{DenseMatrix, InteractionRecord, RatingDataset};

/// Random dataset with every user and item observed at least once.
pub fn random_dataset(m: usize, n: usize, extra: usize, seed: u64) -> RatingDataset {
    let mut rng = seeded(seed);
    let mut seen = vec![false; m * n];
    let mut records = Vec::new();
    let mut push = |u: usize, i: usize, rng: &mut tritrain::rng::Rng| {
        if !seen[u * n + i] {
            seen[u * n + i] = true;
            records.push(InteractionRecord::new(u, i, rng.random_range(1..=5)));
        }
    };
    for k in 0..m.max(n) {
        push(k % m, k % n, &mut rng);
    }
    for _ in 0..extra {
        let (u, i) = (rng.random_range(0..m), rng.random_range(0..n));
        push(u, i, &mut rng);
    }
    RatingDataset::new(m, n, records).unwrap()
}

/// Propensities drawn uniformly from `[lo, 1]`.
pub fn random_propensity(m: usize, n: usize, lo: f64, seed: u64) -> DenseMatrix<f64> {
    let mut rng = seeded(seed);
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(lo..=1.0)).unwrap()
}

/// Random predictor grid with values inside and outside `[1, 5]`.
pub fn random_grid(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = seeded(seed);
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..6.0)).unwrap()
}
