// Full file-based run: LIBSVM input, shuffled passes, per-pass metric CSVs,
// a summary and a manifest with the dataset digest.

use nolana::data::{StreamSpec, Task};
use nolana::experiment::{artifact_paths, run, Method, RunConfig};
use nolana::{synth, LossKind};

pub fn run_example() -> nolana::Result<usize> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("wave.svm");
    synth::write_libsvm(&path, &synth::wave_regression(800, 4, 0.1, 1))?;

    let mut c = RunConfig::new(Method::Nolana, LossKind::Squared, StreamSpec::new(&path, Task::Regression), 15);
    c.gamma = 0.25;
    c.eta = 0.05;
    c.epsilon = 1.0;
    c.shuffles = 3;
    c.out_dir = dir.path().join("out");
    let report = run(&c)?;
    println!("rmse per pass {:?}", report.summary.per_pass);
    println!("dataset sha256 {}", report.manifest.dataset_digest);

    let (csvs, summary, manifest) = artifact_paths(&c);
    for p in csvs.iter().chain([&summary, &manifest]) {
        println!("wrote {}", p.display());
    }
    Ok(csvs.len())
}

fn main() -> nolana::Result<()> {
    run_example().map(|_| ())
}
