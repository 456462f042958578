// Stop a stream halfway, save the learner to JSON, resume from the file and
// check the continuation matches an uninterrupted run.

use nolana::{synth, Checkpoint, KernelConfig, LossKind, ModelParams, Nolana, OanaConfig, StreamLearner};

pub fn run_example() -> nolana::Result<bool> {
    let stream = synth::cluster_classification(600, 3, 6, 0.5, 8);
    let warmup = synth::features(&stream[..10]);
    let oana = OanaConfig::new(10, 0.3, KernelConfig::gaussian(1.0)?);
    let params = ModelParams::new(LossKind::Logistic, 0.3, 1e-4, 1e-3);

    let mut straight = Nolana::new(&warmup, oana, params)?;
    let mut interrupted = Nolana::new(&warmup, oana, params)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("learner.json");

    let (head, tail) = stream.split_at(300);
    for s in head {
        straight.process_point(&s.features, s.label)?;
        interrupted.process_point(&s.features, s.label)?;
    }
    interrupted.checkpoint().save(&path)?;
    let mut resumed = Nolana::from_checkpoint(Checkpoint::load(&path)?)?;

    let mut same = true;
    for s in tail {
        let a = straight.process_point(&s.features, s.label)?;
        let b = resumed.process_point(&s.features, s.label)?;
        same &= a.prediction.to_bits() == b.prediction.to_bits();
    }
    println!("resumed run identical: {same} ({} landmark updates)", resumed.updates());
    Ok(same)
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
