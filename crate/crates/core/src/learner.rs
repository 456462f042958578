//! The adaptive-Nyström online learner.
//!
//! Each point is scored under the current feature map before its label is
//! used. When the point moves a landmark, the model takes its gradient step
//! in the old feature coordinates and is then carried over to the new map by
//! a small ridge fit that keeps predictions on the landmarks unchanged.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BudgetReport;
use crate::numerics::{solve_ridge, DenseMatrix, EigPair};
use crate::oana::{LandmarkState, NystromMap, OanaConfig, UpdateOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Hinge,
    Logistic,
    Squared,
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        !matches!(self, LossKind::Squared)
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            "squared" | "square" => Ok(LossKind::Squared),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
            LossKind::Squared => "squared",
        })
    }
}

/// Loss value and its derivative with respect to the score.
///
/// The hinge subgradient at the kink `y * score == 1` is taken as 0.
pub fn loss_and_grad(loss: LossKind, y: f64, score: f64) -> Result<(f64, f64)> {
    if loss.is_classification() && y != 1.0 && y != -1.0 {
        return Err(Error::invalid(format!("{loss} loss needs labels in {{-1, +1}}, got {y}")));
    }
    Ok(match loss {
        LossKind::Hinge => {
            let slack = 1.0 - y * score;
            if slack > 0.0 {
                (slack, -y)
            } else {
                (0.0, 0.0)
            }
        }
        LossKind::Logistic => {
            let z = -y * score;
            // log(1 + e^z) without overflow
            let value = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            let sigma = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
            (value, -y * sigma)
        }
        LossKind::Squared => {
            let resid = y - score;
            (resid * resid, -2.0 * resid)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant,
    /// `eta / sqrt(t)` at the t-th gradient step.
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineModel {
    pub w: Vec<f64>,
    pub eta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub loss: LossKind,
    pub schedule: EtaSchedule,
    /// Gradient steps taken on the newest point when the map changes.
    pub inner_steps: usize,
    pub steps: u64,
}

impl OnlineModel {
    pub fn new(dim: usize, loss: LossKind, eta: f64, lambda: f64, theta: f64) -> Result<Self> {
        let model = Self {
            w: vec![0.0; dim],
            eta,
            lambda,
            theta,
            loss,
            schedule: EtaSchedule::Constant,
            inner_steps: 1,
            steps: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be finite and > 0, got {}", self.theta)));
        }
        if self.inner_steps == 0 {
            return Err(Error::invalid("inner_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn predict(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.w.len() {
            return Err(Error::invalid(format!(
                "feature length {} does not match model length {}",
                phi.len(),
                self.w.len()
            )));
        }
        Ok(self.w.iter().zip(phi).map(|(w, p)| w * p).sum())
    }

    fn current_eta(&self) -> f64 {
        match self.schedule {
            EtaSchedule::Constant => self.eta,
            EtaSchedule::InvSqrt => self.eta / ((self.steps + 1) as f64).sqrt(),
        }
    }

    /// `w ← (1 - ηλ) w - η ℓ'(w·φ) φ`.
    pub fn sgd_step(&mut self, phi: &[f64], y: f64) -> Result<()> {
        let score = self.predict(phi)?;
        let (_, dscore) = loss_and_grad(self.loss, y, score)?;
        let eta = self.current_eta();
        let shrink = 1.0 - eta * self.lambda;
        for (w, p) in self.w.iter_mut().zip(phi) {
            *w = shrink * *w - eta * dscore * p;
        }
        self.steps += 1;
        Ok(())
    }

    pub fn weight_norm_sq(&self) -> f64 {
        self.w.iter().map(|w| w * w).sum()
    }
}

/// Carry `model` from `old_map` to `new_map` by ridge-fitting its landmark predictions.
pub fn realign_model(model: &mut OnlineModel, old_map: &NystromMap, new_map: &NystromMap) -> Result<()> {
    let landmarks = new_map.landmarks();
    let targets = old_map.features_matrix(landmarks)? * DVector::from_column_slice(&model.w);
    let design = new_map.features_matrix(landmarks)?;
    let w_bar = solve_ridge(&design, &targets, model.theta)?;
    model.w = w_bar.iter().copied().collect();
    Ok(())
}

/// Objective minimized by [`realign_model`], evaluated at `w_bar`.
pub fn realign_objective(
    w_old: &[f64],
    w_bar: &[f64],
    old_map: &NystromMap,
    new_map: &NystromMap,
    theta: f64,
) -> Result<f64> {
    let landmarks = new_map.landmarks();
    let before = old_map.features_matrix(landmarks)? * DVector::from_column_slice(w_old);
    let after = new_map.features_matrix(landmarks)? * DVector::from_column_slice(w_bar);
    Ok((before - after).norm_squared() + theta * w_bar.iter().map(|w| w * w).sum::<f64>())
}

/// Result of feeding one labelled point to a streaming learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub prediction: f64,
    pub loss: f64,
    pub updated: bool,
}

/// A single-pass learner that predicts before it learns.
pub trait StreamLearner {
    fn name(&self) -> &'static str;
    fn process(&mut self, x: &[f64], y: f64) -> Result<StepOutput>;
    fn budget(&self) -> BudgetReport;
    /// Squared norm of the current weights, for regularized-loss bookkeeping.
    fn weight_norm_sq(&self) -> f64;
    fn updates(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub loss: LossKind,
    pub eta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub schedule: EtaSchedule,
    pub inner_steps: usize,
}

impl ModelParams {
    pub fn new(loss: LossKind, eta: f64, lambda: f64, theta: f64) -> Self {
        Self { loss, eta, lambda, theta, schedule: EtaSchedule::Constant, inner_steps: 1 }
    }

    pub(crate) fn build(&self, dim: usize) -> Result<OnlineModel> {
        let mut model = OnlineModel::new(dim, self.loss, self.eta, self.lambda, self.theta)?;
        model.schedule = self.schedule;
        model.inner_steps = self.inner_steps;
        model.validate()?;
        Ok(model)
    }
}

/// Detailed per-point result of [`Nolana::process_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub prediction: f64,
    pub loss: f64,
    pub outcome: UpdateOutcome,
}

/// Online learner over an adaptive Nyström map.
#[derive(Debug, Clone, PartialEq)]
pub struct Nolana {
    state: LandmarkState,
    model: OnlineModel,
    points: u64,
    updates: u64,
}

impl Nolana {
    pub fn new(warmup: &[Vec<f64>], oana: OanaConfig, params: ModelParams) -> Result<Self> {
        let state = LandmarkState::init(warmup, oana)?;
        let model = params.build(state.r())?;
        Ok(Self { state, model, points: 0, updates: 0 })
    }

    /// Fixed first-`m` landmarks: the gate never opens.
    pub fn nogd(warmup: &[Vec<f64>], mut oana: OanaConfig, params: ModelParams) -> Result<Self> {
        oana.epsilon = f64::INFINITY;
        Self::new(warmup, oana, params)
    }

    pub fn state(&self) -> &LandmarkState {
        &self.state
    }

    pub fn model(&self) -> &OnlineModel {
        &self.model
    }

    pub fn points_seen(&self) -> u64 {
        self.points
    }

    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.state.feature_map(x)
    }

    pub fn process_point(&mut self, x: &[f64], y: f64) -> Result<PointResult> {
        let phi = self.state.feature_map(x)?;
        let prediction = self.model.predict(&phi)?;
        let (loss, _) = loss_and_grad(self.model.loss, y, prediction)?;

        let outcome = if self.state.gate_opens(x)? {
            let old_map = self.state.map().clone();
            let outcome = self.state.maybe_update_landmarks(x)?;
            for _ in 0..self.model.inner_steps {
                self.model.sgd_step(&phi, y)?;
            }
            realign_model(&mut self.model, &old_map, self.state.map())?;
            self.updates += 1;
            outcome
        } else {
            self.model.sgd_step(&phi, y)?;
            UpdateOutcome::Unchanged
        };
        self.points += 1;
        Ok(PointResult { prediction, loss, outcome })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let s = &self.state;
        let eig = s.eig();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            model: self.model.clone(),
            oana: *s.config(),
            landmarks: matrix_rows(s.landmarks()),
            counts: s.counts().to_vec(),
            eig_vectors: matrix_rows(&eig.vectors),
            eig_values: eig.values.iter().copied().collect(),
            points: self.points,
            updates: self.updates,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format '{}'", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        let landmarks = rows_matrix(&ck.landmarks)?;
        let vectors = rows_matrix(&ck.eig_vectors)?;
        let eig = EigPair { vectors, values: DVector::from_vec(ck.eig_values) };
        let state = LandmarkState::from_parts(landmarks, ck.counts, eig, ck.oana)?;
        ck.model.validate()?;
        if ck.model.w.len() != state.r() {
            return Err(Error::Checkpoint("model length does not match feature rank".into()));
        }
        Ok(Self { state, model: ck.model, points: ck.points, updates: ck.updates })
    }
}

impl StreamLearner for Nolana {
    fn name(&self) -> &'static str {
        if self.state.config().epsilon.is_infinite() {
            "nogd"
        } else {
            "nolana"
        }
    }

    fn process(&mut self, x: &[f64], y: f64) -> Result<StepOutput> {
        let r = self.process_point(x, y)?;
        Ok(StepOutput { prediction: r.prediction, loss: r.loss, updated: r.outcome.is_updated() })
    }

    fn budget(&self) -> BudgetReport {
        let s = &self.state;
        BudgetReport::new(self.name())
            .component("landmarks", s.landmarks().len())
            .component("eigenvectors", s.eig().vectors.len())
            .component("counts", s.counts().len())
            .component("eigenvalues", s.eigenvalues().len())
            .with_weights(self.model.w.len())
    }

    fn weight_norm_sq(&self) -> f64 {
        self.model.weight_norm_sq()
    }

    fn updates(&self) -> u64 {
        self.updates
    }
}

pub const CHECKPOINT_FORMAT: &str = "nolana-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned resumable snapshot of a [`Nolana`] learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: OnlineModel,
    pub oana: OanaConfig,
    pub landmarks: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
    pub eig_vectors: Vec<Vec<f64>>,
    pub eig_values: Vec<f64>,
    pub points: u64,
    pub updates: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        crate::experiment::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn matrix_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    crate::numerics::rows_of(m)
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Checkpoint("ragged or empty matrix".into()));
    }
    Ok(DenseMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::KernelConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predict_examples() {
        let mut m = OnlineModel::new(3, LossKind::Hinge, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
        m.w = vec![1.0, 0.0, 0.0];
        assert_eq!(m.predict(&[3.0, 5.0, 7.0]).unwrap(), 3.0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn predict_matches_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = OnlineModel::new(40, LossKind::Squared, 0.1, 0.0, 1.0).unwrap();
        m.w = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut acc = 0.0;
        for i in 0..40 {
            acc += m.w[i] * phi[i];
        }
        assert!((m.predict(&phi).unwrap() - acc).abs() < 1e-12);
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss_and_grad(LossKind::Hinge, 1.0, 2.0).unwrap(), (0.0, 0.0));
        assert_eq!(loss_and_grad(LossKind::Hinge, 1.0, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(loss_and_grad(LossKind::Hinge, -1.0, 0.5).unwrap(), (1.5, 1.0));
        assert_eq!(loss_and_grad(LossKind::Squared, 1.0, 3.0).unwrap(), (4.0, 4.0));
        assert!(loss_and_grad(LossKind::Logistic, 0.0, 1.0).is_err());
        assert!(loss_and_grad(LossKind::Hinge, 2.0, 1.0).is_err());
        assert!(loss_and_grad(LossKind::Squared, 2.5, 1.0).is_ok());
        // far tails stay finite
        let (v, g) = loss_and_grad(LossKind::Logistic, 1.0, -800.0).unwrap();
        assert!((v - 800.0).abs() < 1e-9 && (g + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_examples() {
        let mut m = OnlineModel::new(2, LossKind::Squared, 0.0, 0.3, 1.0).unwrap();
        m.w = vec![0.5, -0.25];
        let before = m.w.clone();
        m.sgd_step(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(m.w, before);

        let mut m = OnlineModel::new(3, LossKind::Squared, 0.1, 0.0, 1.0).unwrap();
        m.sgd_step(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert!((m.w[0] - 0.2).abs() < 1e-15);
        assert_eq!(&m.w[1..], &[0.0, 0.0]);
    }

    #[test]
    fn inv_sqrt_schedule_decays() {
        let mut m = OnlineModel::new(1, LossKind::Squared, 1.0, 0.0, 1.0).unwrap();
        m.schedule = EtaSchedule::InvSqrt;
        assert_eq!(m.current_eta(), 1.0);
        m.sgd_step(&[0.0], 0.0).unwrap();
        assert!((m.current_eta() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    fn learner(points: &[Vec<f64>], epsilon: f64, loss: LossKind) -> Nolana {
        let oana = OanaConfig::new(points.len(), epsilon, KernelConfig::gaussian(0.5).unwrap());
        Nolana::new(points, oana, ModelParams::new(loss, 0.2, 0.0, 0.1)).unwrap()
    }

    #[test]
    fn zero_model_first_prediction() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        for y in [-1.0, 1.0] {
            let mut l = learner(&pts, 0.0, LossKind::Hinge);
            let r = l.process_point(&[0.3, 0.3], y).unwrap();
            assert_eq!(r.prediction, 0.0);
            assert_eq!(r.loss, 1.0);
        }
    }

    #[test]
    fn realign_zero_model_stays_zero() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let mut l = learner(&pts, 0.0, LossKind::Squared);
        let old = l.state.map().clone();
        l.state.maybe_update_landmarks(&[2.0]).unwrap();
        let mut m = OnlineModel::new(l.state.r(), LossKind::Squared, 0.1, 0.0, 0.7).unwrap();
        realign_model(&mut m, &old, l.state.map()).unwrap();
        assert!(m.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let stream: Vec<(Vec<f64>, f64)> = (0..120)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = if x[0] * x[1] > 0.0 { 1.0 } else { -1.0 };
                (x, y)
            })
            .collect();
        let warm: Vec<Vec<f64>> = stream[..8].iter().map(|s| s.0.clone()).collect();
        let mut full = learner(&warm, 0.3, LossKind::Hinge);
        let mut preds = Vec::new();
        for (x, y) in &stream {
            preds.push(full.process_point(x, *y).unwrap().prediction);
        }

        let mut first = learner(&warm, 0.3, LossKind::Hinge);
        for (x, y) in &stream[..60] {
            first.process_point(x, *y).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        first.checkpoint().save(&path).unwrap();
        let mut resumed = Nolana::from_checkpoint(Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(resumed, first);
        for (i, (x, y)) in stream[60..].iter().enumerate() {
            let p = resumed.process_point(x, *y).unwrap().prediction;
            assert_eq!(p.to_bits(), preds[60 + i].to_bits());
        }
        assert_eq!(resumed, full);
    }

    #[test]
    fn nogd_checkpoint_keeps_infinite_gate() {
        let pts = vec![vec![0.0], vec![1.0]];
        let oana = OanaConfig::new(2, 0.0, KernelConfig::gaussian(1.0).unwrap());
        let l = Nolana::nogd(&pts, oana, ModelParams::new(LossKind::Hinge, 0.1, 0.0, 1.0)).unwrap();
        let text = serde_json::to_string(&l.checkpoint()).unwrap();
        let back = Nolana::from_checkpoint(serde_json::from_str(&text).unwrap()).unwrap();
        assert!(back.state().config().epsilon.is_infinite());
        assert_eq!(back.name(), "nogd");
    }
}
