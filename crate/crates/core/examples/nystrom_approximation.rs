// Relative kernel approximation error of the adaptive landmarks against
// fixed landmarks and random Fourier features at matched budgets.

use nolana::{approx_experiment, synth, ApproxMethod, KernelConfig, OanaConfig};

pub fn run_example() -> nolana::Result<Vec<(usize, [f64; 3])>> {
    let stream = synth::features(&synth::cluster_classification(1500, 16, 25, 1.0, 3));
    let kernel = KernelConfig::gaussian(0.03)?;
    let mut rows = Vec::new();
    println!("{:>4} {:>9} {:>9} {:>9}", "m", "oana", "nogd", "fogd");
    for m in [10, 20, 40] {
        let cfg = OanaConfig::new(m, 0.0, kernel);
        let mut errs = [0.0; 3];
        for (slot, method) in [ApproxMethod::Oana, ApproxMethod::Nogd, ApproxMethod::Fogd].into_iter().enumerate() {
            errs[slot] = approx_experiment(&stream, method, cfg, 400, 0)?.error;
        }
        println!("{m:>4} {:>9.4} {:>9.4} {:>9.4}", errs[0], errs[1], errs[2]);
        rows.push((m, errs));
    }
    Ok(rows)
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
