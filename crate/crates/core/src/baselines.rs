//! Comparison learners run under the same budget: linear Passive-Aggressive,
//! fixed-landmark Nyström gradient descent (NOGD) and random-Fourier-feature
//! gradient descent (FOGD).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::BudgetReport;
use crate::learner::{loss_and_grad, ModelParams, Nolana, OnlineModel, StepOutput, StreamLearner};
use crate::numerics::{DenseMatrix, KernelConfig};
use crate::oana::OanaConfig;

/// Number of random features with the same stored-real budget as `m`
/// landmarks of dimension `d` at rank `r`: `floor((m d + m r) / d)`.
pub fn parity_dimension(m: usize, d: usize, r: usize) -> usize {
    (m * d + m * r) / d
}

/// Random Fourier features `z_i(x) = sqrt(2/D) cos(ω_i·x + b_i)` for the Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFeatures {
    omega: DenseMatrix,
    phase: DVector<f64>,
    scale: f64,
    seed: u64,
}

impl FourierFeatures {
    pub fn new(d: usize, n_features: usize, kernel: &KernelConfig, seed: u64) -> Result<Self> {
        if d == 0 || n_features == 0 {
            return Err(Error::invalid("Fourier features need d >= 1 and D >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Spectral density of exp(-γ‖δ‖²) is N(0, 2γ I).
        let normal = Normal::new(0.0, (2.0 * kernel.gamma).sqrt())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut omega = DenseMatrix::zeros(n_features, d);
        for i in 0..n_features {
            for j in 0..d {
                omega[(i, j)] = normal.sample(&mut rng);
            }
        }
        let phase = DVector::from_fn(n_features, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
        Ok(Self { omega, phase, scale: (2.0 / n_features as f64).sqrt(), seed })
    }

    pub fn n_features(&self) -> usize {
        self.omega.nrows()
    }

    pub fn dim(&self) -> usize {
        self.omega.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn map(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "sample has dimension {}, frequencies have {}",
                x.len(),
                self.dim()
            )));
        }
        let proj = &self.omega * DVector::from_column_slice(x);
        Ok(proj
            .iter()
            .zip(self.phase.iter())
            .map(|(p, b)| self.scale * (p + b).cos())
            .collect())
    }

    /// Features for every row of `points`.
    pub fn map_matrix(&self, points: &DenseMatrix) -> Result<DenseMatrix> {
        if points.ncols() != self.dim() {
            return Err(Error::invalid("point matrix dimension mismatch"));
        }
        let mut z = points * self.omega.transpose();
        for (k, mut col) in z.column_iter_mut().enumerate() {
            let b = self.phase[k];
            col.apply(|v| *v = self.scale * (*v + b).cos());
        }
        Ok(z)
    }

    pub fn stored_reals(&self) -> usize {
        self.omega.len() + self.phase.len()
    }
}

pub fn rff_map(x: &[f64], ff: &FourierFeatures) -> Result<Vec<f64>> {
    ff.map(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaMode {
    Classification,
    /// ε-insensitive regression.
    Regression { insensitivity: f64 },
}

/// Linear Passive-Aggressive model (PA-I).
#[derive(Debug, Clone, PartialEq)]
pub struct PaModel {
    pub w: Vec<f64>,
    /// Step cap `C`; `f64::INFINITY` gives the unbounded (PA) variant.
    pub aggressiveness: f64,
    pub mode: PaMode,
    pub skipped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaStep {
    pub prediction: f64,
    /// Hinge or ε-insensitive loss before the update.
    pub loss: f64,
    pub skipped: bool,
}

impl PaModel {
    pub fn new(d: usize, aggressiveness: f64, mode: PaMode) -> Result<Self> {
        if !(aggressiveness > 0.0) {
            return Err(Error::invalid("aggressiveness must be positive"));
        }
        Ok(Self { w: vec![0.0; d], aggressiveness, mode, skipped: 0 })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Predict on `x`, then move `w` just enough to fit `(x, y)` (capped by the aggressiveness).
    pub fn pa_step(&mut self, x: &[f64], y: f64) -> Result<PaStep> {
        if x.len() != self.w.len() {
            return Err(Error::invalid("PA sample dimension mismatch"));
        }
        let prediction = self.predict(x);
        let (loss, direction) = match self.mode {
            PaMode::Classification => {
                if y != 1.0 && y != -1.0 {
                    return Err(Error::invalid(format!("PA classification needs ±1 labels, got {y}")));
                }
                ((1.0 - y * prediction).max(0.0), y)
            }
            PaMode::Regression { insensitivity } => {
                let resid = y - prediction;
                ((resid.abs() - insensitivity).max(0.0), resid.signum())
            }
        };
        if loss == 0.0 {
            return Ok(PaStep { prediction, loss, skipped: false });
        }
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            self.skipped += 1;
            return Ok(PaStep { prediction, loss, skipped: true });
        }
        let tau = self.aggressiveness.min(loss / norm_sq);
        for (w, v) in self.w.iter_mut().zip(x) {
            *w += tau * direction * v;
        }
        Ok(PaStep { prediction, loss, skipped: false })
    }
}

pub fn pa_step(model: &mut PaModel, x: &[f64], y: f64) -> Result<PaStep> {
    model.pa_step(x, y)
}

/// [`PaModel`] as a streaming learner; reports the configured loss for metrics.
#[derive(Debug, Clone)]
pub struct PaLearner {
    model: PaModel,
    report_loss: crate::learner::LossKind,
}

impl PaLearner {
    pub fn new(model: PaModel, report_loss: crate::learner::LossKind) -> Self {
        Self { model, report_loss }
    }

    pub fn model(&self) -> &PaModel {
        &self.model
    }
}

impl StreamLearner for PaLearner {
    fn name(&self) -> &'static str {
        "pa"
    }

    fn process(&mut self, x: &[f64], y: f64) -> Result<StepOutput> {
        let step = self.model.pa_step(x, y)?;
        let (loss, _) = loss_and_grad(self.report_loss, y, step.prediction)?;
        Ok(StepOutput { prediction: step.prediction, loss, updated: false })
    }

    fn budget(&self) -> BudgetReport {
        BudgetReport::new("pa").with_weights(self.model.w.len())
    }

    fn weight_norm_sq(&self) -> f64 {
        self.model.w.iter().map(|w| w * w).sum()
    }
}

/// Fixed-landmark Nyström gradient descent: the adaptive learner with its gate closed.
pub fn nogd_learner(warmup: &[Vec<f64>], oana: OanaConfig, params: ModelParams) -> Result<Nolana> {
    Nolana::nogd(warmup, oana, params)
}

/// Online gradient descent over random Fourier features.
#[derive(Debug, Clone)]
pub struct Fogd {
    features: FourierFeatures,
    model: OnlineModel,
}

impl Fogd {
    pub fn new(features: FourierFeatures, params: ModelParams) -> Result<Self> {
        let model = params.build(features.n_features())?;
        Ok(Self { features, model })
    }

    /// Budget-matched to `m` landmarks at rank `r` in dimension `d`.
    pub fn with_parity(
        d: usize,
        m: usize,
        r: usize,
        kernel: &KernelConfig,
        seed: u64,
        params: ModelParams,
    ) -> Result<Self> {
        let n = parity_dimension(m, d, r);
        if n == 0 {
            return Err(Error::invalid("budget parity leaves no Fourier features"));
        }
        Self::new(FourierFeatures::new(d, n, kernel, seed)?, params)
    }

    pub fn features(&self) -> &FourierFeatures {
        &self.features
    }

    pub fn model(&self) -> &OnlineModel {
        &self.model
    }
}

impl StreamLearner for Fogd {
    fn name(&self) -> &'static str {
        "fogd"
    }

    fn process(&mut self, x: &[f64], y: f64) -> Result<StepOutput> {
        let z = self.features.map(x)?;
        let prediction = self.model.predict(&z)?;
        let (loss, _) = loss_and_grad(self.model.loss, y, prediction)?;
        self.model.sgd_step(&z, y)?;
        Ok(StepOutput { prediction, loss, updated: false })
    }

    fn budget(&self) -> BudgetReport {
        BudgetReport::new("fogd")
            .component("frequencies", self.features.omega.len())
            .component("phases", self.features.phase.len())
            .with_weights(self.model.w.len())
    }

    fn weight_norm_sq(&self) -> f64 {
        self.model.weight_norm_sq()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LossKind;

    fn rng_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(lo..hi)).collect()
    }

    #[test]
    fn parity_example() {
        assert_eq!(parity_dimension(100, 256, 80), 131);
        assert_eq!(parity_dimension(20, 12, 16), 46);
    }

    #[test]
    fn rff_deterministic_and_bounded() {
        let k = KernelConfig::gaussian(0.3).unwrap();
        let ff = FourierFeatures::new(4, 64, &k, 7).unwrap();
        let ff2 = FourierFeatures::new(4, 64, &k, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = rng_vec(&mut rng, 4, -5.0, 5.0);
            let z = rff_map(&x, &ff).unwrap();
            assert_eq!(z, rff_map(&x, &ff2).unwrap());
            assert!(z.iter().all(|v| v.abs() <= ff.scale()));
            assert!(z.iter().map(|v| v * v).sum::<f64>() <= 2.0 + 1e-12);
        }
        assert!(rff_map(&[1.0], &ff).is_err());
    }

    #[test]
    fn rff_matrix_matches_rowwise() {
        let k = KernelConfig::gaussian(0.8).unwrap();
        let ff = FourierFeatures::new(3, 10, &k, 1).unwrap();
        let pts = DenseMatrix::from_fn(5, 3, |i, j| (i as f64) * 0.3 - j as f64);
        let zm = ff.map_matrix(&pts).unwrap();
        for i in 0..5 {
            let row: Vec<f64> = pts.row(i).iter().copied().collect();
            let z = ff.map(&row).unwrap();
            for k in 0..10 {
                assert!((zm[(i, k)] - z[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rff_monte_carlo_kernel() {
        let k = KernelConfig::gaussian(0.5).unwrap();
        let ff = FourierFeatures::new(3, 5000, &k, 2024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut total = 0.0;
        for _ in 0..200 {
            let x = rng_vec(&mut rng, 3, -1.0, 1.0);
            let y = rng_vec(&mut rng, 3, -1.0, 1.0);
            let zx = ff.map(&x).unwrap();
            let zy = ff.map(&y).unwrap();
            let approx: f64 = zx.iter().zip(&zy).map(|(a, b)| a * b).sum();
            total += (approx - k.eval(&x, &y)).abs();
        }
        assert!(total / 200.0 <= 0.05, "mean abs error {}", total / 200.0);
    }

    #[test]
    fn pa_examples() {
        let mut m = PaModel::new(2, f64::INFINITY, PaMode::Classification).unwrap();
        m.w = vec![2.0, 0.0];
        let before = m.w.clone();
        m.pa_step(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(m.w, before);

        let mut m = PaModel::new(3, f64::INFINITY, PaMode::Classification).unwrap();
        let s = m.pa_step(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(s.loss, 1.0);
        assert_eq!(m.w, vec![1.0, 0.0, 0.0]);

        let s = m.pa_step(&[0.0, 0.0, 0.0], -1.0).unwrap();
        assert!(s.skipped);
        assert_eq!(m.skipped, 1);
    }

    #[test]
    fn pa_unbounded_fits_current_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = PaModel::new(6, f64::INFINITY, PaMode::Classification).unwrap();
        for _ in 0..100 {
            let x = rng_vec(&mut rng, 6, -1.0, 1.0);
            let y = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            m.pa_step(&x, y).unwrap();
            let after = (1.0 - y * m.predict(&x)).max(0.0);
            assert!(after < 1e-12, "post-update loss {after}");
        }
    }

    #[test]
    fn pa_regression_insensitive() {
        let mut m = PaModel::new(1, f64::INFINITY, PaMode::Regression { insensitivity: 0.1 }).unwrap();
        m.pa_step(&[2.0], 3.0).unwrap();
        assert!(((3.0 - m.predict(&[2.0])).abs() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn fogd_separable_stream() {
        let k = KernelConfig::gaussian(0.5).unwrap();
        let params = ModelParams::new(LossKind::Hinge, 0.5, 0.0, 1.0);
        let mut f = Fogd::new(FourierFeatures::new(2, 200, &k, 4).unwrap(), params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut correct = 0;
        let n = 5000;
        for _ in 0..n {
            let x = rng_vec(&mut rng, 2, -2.0, 2.0);
            let y = if x[0] + 0.5 * x[1] > 0.0 { 1.0 } else { -1.0 };
            let out = f.process(&x, y).unwrap();
            if (out.prediction >= 0.0) == (y > 0.0) {
                correct += 1;
            }
        }
        let acc = correct as f64 / n as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
    }
}
