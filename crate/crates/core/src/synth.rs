//! Seeded synthetic streams for examples, tests and smoke runs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{format_libsvm_line, Sample};
use crate::error::Result;

/// Gaussian clusters whose labels alternate by cluster index, so no single
/// hyperplane separates the classes.
pub fn cluster_classification(n: usize, d: usize, clusters: usize, spread: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..d).map(|_| rng.random_range(-4.0..4.0)).collect())
        .collect();
    let noise = Normal::new(0.0, spread).expect("spread must be finite and positive");
    (0..n)
        .map(|_| {
            let c = rng.random_range(0..clusters);
            let x = centers[c].iter().map(|v| v + noise.sample(&mut rng)).collect();
            Sample::new(x, if c % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

/// Smooth nonlinear regression target `sin(x0) + cos(x1) + ...` plus Gaussian noise.
pub fn wave_regression(n: usize, d: usize, noise: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("noise must be finite");
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y = x
                .iter()
                .enumerate()
                .map(|(i, v)| if i % 2 == 0 { v.sin() } else { v.cos() })
                .sum::<f64>()
                + if noise > 0.0 { eps.sample(&mut rng) } else { 0.0 };
            Sample::new(x, y)
        })
        .collect()
}

/// Two-dimensional checkerboard with `cells` squares per side on `[0, 1)²`.
pub fn checkerboard(n: usize, cells: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let cx = (x * cells as f64) as usize;
            let cy = (y * cells as f64) as usize;
            Sample::new(vec![x, y], if (cx + cy) % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

pub fn write_libsvm(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut text = String::new();
    for s in samples {
        text.push_str(&format_libsvm_line(s));
        text.push('\n');
    }
    crate::experiment::write_atomic(path, text.as_bytes())
}

pub fn features(samples: &[Sample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.features.clone()).collect()
}
