// Stream a synthetic two-class problem through NOLANA and report
// prequential accuracy.
//
// ```text
// cargo run --example quickstart
// ```

use nolana::{synth, KernelConfig, LossKind, MetricsLog, ModelParams, Nolana, OanaConfig};

pub fn run_example() -> nolana::Result<f64> {
    let stream = synth::cluster_classification(3000, 3, 10, 0.5, 7);
    let m = 20;
    let warmup = synth::features(&stream[..m]);
    let oana = OanaConfig::new(m, 0.5, KernelConfig::gaussian(0.5)?);
    let mut learner = Nolana::new(&warmup, oana, ModelParams::new(LossKind::Hinge, 0.5, 0.0, 1e-3))?;

    let mut log = MetricsLog::new(true);
    for s in &stream {
        let step = learner.process_point(&s.features, s.label)?;
        log.push(step.prediction, s.label, step.loss, step.outcome.is_updated(), 0, 0.0);
    }
    println!(
        "accuracy {:.4} after {} points, {} landmark updates",
        log.final_metric(),
        log.len(),
        log.total_updates()
    );
    Ok(log.final_metric())
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
