// Trade accuracy for fewer landmark refreshes by raising the gate threshold.

use nolana::data::{StreamSpec, Task};
use nolana::experiment::{sweep_csv, sweep_epsilon, Method, RunConfig, SweepRow};
use nolana::{synth, LossKind};

pub fn run_example() -> nolana::Result<Vec<SweepRow>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("clusters.svm");
    synth::write_libsvm(&path, &synth::cluster_classification(1500, 4, 30, 0.6, 2))?;
    let mut c = RunConfig::new(Method::Nolana, LossKind::Hinge, StreamSpec::new(&path, Task::Classification), 30);
    c.gamma = 0.5;
    c.eta = 0.5;
    c.shuffles = 1;
    let rows = sweep_epsilon(&c, &[0.0, 1.0, 4.0, f64::INFINITY])?;
    print!("{}", sweep_csv(Task::Classification, &rows));
    Ok(rows)
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
