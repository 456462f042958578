// Replace one landmark and refresh the truncated eigendecomposition from
// the previous eigenvectors, then compare with a full recomputation.

use nolana::{kernel_cross, truncated_eig, warmstart_randomized_eig, DenseMatrix, KernelConfig, LandmarkState, OanaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> nolana::Result<(f64, f64)> {
    let (m, r, d) = (100, 80, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pts: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let kernel = KernelConfig::gaussian(1.0)?;
    let state = LandmarkState::init(&pts, OanaConfig::new(m, 0.0, kernel).with_rank(r))?;

    let q = 17;
    let moved: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (a, b) = state.rank2_delta(q, &moved)?;
    let warm = warmstart_randomized_eig(&state.eig(), &a, &b, 3, r)?;

    pts[q] = moved;
    let x = DenseMatrix::from_fn(m, d, |i, j| pts[i][j]);
    let e_bar = kernel_cross(&x, &x, &kernel)?;
    let scratch = truncated_eig(&e_bar, r)?;
    let warm_err = (&e_bar - warm.reconstruct()).norm();
    let best_err = (&e_bar - scratch.reconstruct()).norm();
    println!("warm start {warm_err:.3e}, from scratch {best_err:.3e}, ratio {:.3}", warm_err / best_err);
    Ok((warm_err, best_err))
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
