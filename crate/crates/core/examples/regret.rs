// Cumulative regret against the best fixed ridge model in the final
// feature space, printed at doubling horizons.

use nolana::{
    regret_curve, synth, DenseMatrix, KernelConfig, LossKind, MetricsLog, ModelParams, Nolana, OanaConfig,
};

pub fn run_example() -> nolana::Result<Vec<f64>> {
    let stream = synth::wave_regression(4000, 3, 0.1, 5);
    let lambda = 1e-3;
    let warmup = synth::features(&stream[..20]);
    let oana = OanaConfig::new(20, 0.5, KernelConfig::gaussian(0.5)?);
    let mut learner = Nolana::new(&warmup, oana, ModelParams::new(LossKind::Squared, 0.05, lambda, 1e-3))?;
    let mut log = MetricsLog::new(false);
    for s in &stream {
        let norm = learner.model().weight_norm_sq();
        let step = learner.process_point(&s.features, s.label)?;
        log.push(step.prediction, s.label, step.loss, step.outcome.is_updated(), 0, norm);
    }

    let x = DenseMatrix::from_fn(stream.len(), 3, |i, j| stream[i].features[j]);
    let phi = learner.state().map().features_matrix(&x)?;
    let labels: Vec<f64> = stream.iter().map(|s| s.label).collect();
    let curve = regret_curve(&log, &phi, &labels, lambda, LossKind::Squared, &[500, 1000, 2000, 4000])?;
    for p in &curve {
        println!("T={:<5} online {:>10.2} comparator {:>10.2} regret {:>9.2}", p.t, p.online, p.comparator, p.regret);
    }
    Ok(curve.iter().map(|p| p.regret).collect())
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
