macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(quickstart);
example!(nystrom_approximation);
example!(warm_start_refresh);
example!(compare_baselines);
example!(epsilon_sweep);
example!(regret);
example!(checkpoint_resume);
example!(libsvm_pipeline);

use nolana::experiment::Method;

#[test]
fn quickstart_learns() {
    assert!(quickstart::run_example().unwrap() > 0.8);
}

#[test]
fn adaptive_landmarks_approximate_best() {
    for (_, [oana, nogd, fogd]) in nystrom_approximation::run_example().unwrap() {
        assert!(oana < nogd && oana < fogd);
    }
}

#[test]
fn warm_start_close_to_scratch() {
    let (warm, best) = warm_start_refresh::run_example().unwrap();
    assert!(warm <= 10.0 * best);
}

#[test]
fn baselines_rank_as_expected() {
    let acc = compare_baselines::run_example().unwrap();
    let get = |m: Method| acc.iter().find(|(k, _)| *k == m).unwrap().1;
    assert!(get(Method::Nolana) > get(Method::Nogd));
    assert!(get(Method::Pa) < get(Method::Fogd));
}

#[test]
fn sweep_updates_fall() {
    let rows = epsilon_sweep::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[1].updates <= w[0].updates));
    assert_eq!(rows.last().unwrap().updates, 0.0);
}

#[test]
fn regret_grows_sublinearly() {
    let r = regret::run_example().unwrap();
    assert!(r.windows(2).all(|w| w[1] < 2.0 * w[0]));
}

#[test]
fn checkpoint_resume_matches() {
    assert!(checkpoint_resume::run_example().unwrap());
}

#[test]
fn pipeline_writes_artifacts() {
    assert_eq!(libsvm_pipeline::run_example().unwrap(), 3);
}
