// NOLANA against NOGD, FOGD and Passive-Aggressive on one LIBSVM stream,
// averaged over seeded shuffles.

use nolana::data::{StreamSpec, Task};
use nolana::experiment::{execute, Method, RunConfig};
use nolana::{synth, LossKind};

pub fn run_example() -> nolana::Result<Vec<(Method, f64)>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("clusters.svm");
    synth::write_libsvm(&path, &synth::cluster_classification(2000, 8, 30, 0.8, 4))?;

    let mut out = Vec::new();
    for method in [Method::Nolana, Method::Nogd, Method::Fogd, Method::Pa] {
        let mut c = RunConfig::new(method, LossKind::Hinge, StreamSpec::new(&path, Task::Classification), 30);
        c.gamma = 0.25;
        c.eta = 0.5;
        c.shuffles = 2;
        let s = execute(&c)?.summary;
        println!("{:<7} accuracy {:.4} ± {:.4}  budget {} reals", method.to_string(), s.mean, s.stddev, s.budget.total);
        out.push((method, s.mean));
    }
    Ok(out)
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
