//! Nonlinear online learning over an adaptive Nyström feature map.
//!
//! Landmarks are maintained as online-kmeans centroids under a fixed memory
//! budget; the learner corrects its weights whenever the map moves. Baseline
//! learners (Passive-Aggressive, fixed-landmark Nyström and random Fourier
//! features) share the same streaming interface and budget accounting.
//!
//! ```
//! use nolana::{KernelConfig, LossKind, ModelParams, Nolana, OanaConfig};
//!
//! let warmup = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
//! let oana = OanaConfig::new(3, 0.1, KernelConfig::gaussian(1.0).unwrap());
//! let mut learner = Nolana::new(&warmup, oana, ModelParams::new(LossKind::Hinge, 0.5, 0.0, 1e-3)).unwrap();
//! let step = learner.process_point(&[0.5, 0.5], 1.0).unwrap();
//! assert_eq!(step.prediction, 0.0);
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learner;
pub mod numerics;
pub mod oana;
pub mod synth;

mod serde_inf;

pub use baselines::{nogd_learner, parity_dimension, rff_map, Fogd, FourierFeatures, PaLearner, PaMode, PaModel};
pub use data::{build_stream, parse_libsvm_line, Dataset, LabelMap, Sample, StreamSpec, Task};
pub use error::{Error, Result};
pub use eval::{
    approx_experiment, regret_curve, regret_diagnostic, relative_approx_error, ApproxMethod, BudgetReport,
    MetricsLog,
};
pub use experiment::{Method, RunConfig};
pub use learner::{
    loss_and_grad, realign_model, Checkpoint, EtaSchedule, LossKind, ModelParams, Nolana, OnlineModel,
    StepOutput, StreamLearner,
};
pub use numerics::{
    gaussian_kernel, kernel_cross, pinv_sqrt, solve_ridge, truncated_eig, warmstart_randomized_eig, DenseMatrix,
    EigPair, KernelConfig,
};
pub use oana::{LandmarkState, NystromMap, OanaConfig, UpdateOutcome};
