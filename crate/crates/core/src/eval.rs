//! Prequential metrics, kernel-approximation error, budget accounting and the
//! empirical regret diagnostic.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{parity_dimension, FourierFeatures};
use crate::error::{Error, Result};
use crate::learner::LossKind;
use crate::numerics::{kernel_cross, DenseMatrix};
use crate::oana::{LandmarkState, OanaConfig};

pub const METRICS_CSV_HEADER: &str = "step,prediction,label,loss,cum_metric,updated,elapsed_ns";

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub prediction: f64,
    pub label: f64,
    pub loss: f64,
    /// Cumulative accuracy (classification) or running RMSE (regression).
    pub cum_metric: f64,
    pub updated: bool,
    pub elapsed_ns: u64,
    /// ‖w_t‖² of the model that made the prediction; not written to CSV.
    pub weight_norm_sq: f64,
}

/// Decision rule for classification scores.
pub fn decide(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Test-then-train log of a single pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLog {
    classification: bool,
    records: Vec<StepRecord>,
    correct: u64,
    sq_err: f64,
    updates: u64,
}

impl MetricsLog {
    pub fn new(classification: bool) -> Self {
        Self { classification, records: Vec::new(), correct: 0, sq_err: 0.0, updates: 0 }
    }

    pub fn is_classification(&self) -> bool {
        self.classification
    }

    pub fn push(
        &mut self,
        prediction: f64,
        label: f64,
        loss: f64,
        updated: bool,
        elapsed_ns: u64,
        weight_norm_sq: f64,
    ) {
        let step = self.records.len() + 1;
        if self.classification {
            if decide(prediction) == label {
                self.correct += 1;
            }
        } else {
            self.sq_err += (label - prediction).powi(2);
        }
        if updated {
            self.updates += 1;
        }
        let cum_metric = self.current(step);
        self.records.push(StepRecord {
            step,
            prediction,
            label,
            loss,
            cum_metric,
            updated,
            elapsed_ns,
            weight_norm_sq,
        });
    }

    fn current(&self, steps: usize) -> f64 {
        if steps == 0 {
            return f64::NAN;
        }
        if self.classification {
            self.correct as f64 / steps as f64
        } else {
            (self.sq_err / steps as f64).sqrt()
        }
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Final accuracy (fraction) or RMSE.
    pub fn final_metric(&self) -> f64 {
        self.current(self.records.len())
    }

    pub fn total_updates(&self) -> u64 {
        self.updates
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum()
    }

    /// Final metric recomputed from the raw records, independent of the accumulators.
    pub fn recompute_final(&self) -> f64 {
        let n = self.records.len() as f64;
        if self.classification {
            self.records.iter().filter(|r| decide(r.prediction) == r.label).count() as f64 / n
        } else {
            (self.records.iter().map(|r| (r.label - r.prediction).powi(2)).sum::<f64>() / n).sqrt()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(METRICS_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step,
                r.prediction,
                r.label,
                r.loss,
                r.cum_metric,
                u8::from(r.updated),
                r.elapsed_ns
            );
        }
        out
    }
}

/// Stored-real accounting for one learner, read from its live state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub method: String,
    pub components: Vec<(String, usize)>,
    /// Reals in the budget proper (excludes model weights).
    pub total: usize,
    pub model_weights: usize,
}

impl BudgetReport {
    pub fn new(method: &str) -> Self {
        Self { method: method.to_string(), components: Vec::new(), total: 0, model_weights: 0 }
    }

    pub fn component(mut self, name: &str, count: usize) -> Self {
        self.components.push((name.to_string(), count));
        self.total += count;
        self
    }

    pub fn with_weights(mut self, count: usize) -> Self {
        self.model_weights = count;
        self
    }

    pub fn total_with_weights(&self) -> usize {
        self.total + self.model_weights
    }
}

/// `‖G − Ḡ‖_F / ‖G‖_F`.
pub fn relative_approx_error(g: &DenseMatrix, g_bar: &DenseMatrix) -> Result<f64> {
    if g.shape() != g_bar.shape() {
        return Err(Error::invalid("kernel matrices differ in shape"));
    }
    let denom = g.norm();
    if denom == 0.0 {
        return Err(Error::invalid("reference kernel matrix has zero norm"));
    }
    Ok((g - g_bar).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxMethod {
    Oana,
    Nogd,
    Fogd,
}

impl std::fmt::Display for ApproxMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApproxMethod::Oana => "oana",
            ApproxMethod::Nogd => "nogd",
            ApproxMethod::Fogd => "fogd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxPoint {
    pub method: ApproxMethod,
    pub m: usize,
    pub budget: usize,
    pub error: f64,
}

/// Rows of `stream` kept by seeded reservoir sampling, in stream order.
pub fn reservoir_subset(stream: &[Vec<f64>], size: usize, seed: u64) -> Vec<usize> {
    if size >= stream.len() {
        return (0..stream.len()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = (0..size).collect();
    for i in size..stream.len() {
        let j = rng.random_range(0..=i);
        if j < size {
            keep[j] = i;
        }
    }
    keep.sort_unstable();
    keep
}

/// Run the method's feature map over the whole stream, then measure the
/// relative kernel approximation error on a held subset.
pub fn approx_experiment(
    stream: &[Vec<f64>],
    method: ApproxMethod,
    oana: OanaConfig,
    subset_size: usize,
    seed: u64,
) -> Result<ApproxPoint> {
    if subset_size == 0 || subset_size > stream.len() {
        return Err(Error::invalid(format!(
            "subset size {subset_size} outside 1..={}",
            stream.len()
        )));
    }
    let d = stream[0].len();
    let keep = reservoir_subset(stream, subset_size, seed);
    let subset = DenseMatrix::from_fn(keep.len(), d, |i, j| stream[keep[i]][j]);
    let g = kernel_cross(&subset, &subset, &oana.kernel)?;

    let (phi, budget) = match method {
        ApproxMethod::Oana | ApproxMethod::Nogd => {
            let mut cfg = oana;
            if method == ApproxMethod::Nogd {
                cfg.epsilon = f64::INFINITY;
            }
            let mut state = LandmarkState::init(stream, cfg)?;
            if method == ApproxMethod::Oana {
                for x in stream {
                    state.maybe_update_landmarks(x)?;
                }
            }
            (state.map().features_matrix(&subset)?, state.stored_reals())
        }
        ApproxMethod::Fogd => {
            let n = parity_dimension(oana.m, d, oana.r).max(1);
            let ff = FourierFeatures::new(d, n, &oana.kernel, seed)?;
            (ff.map_matrix(&subset)?, ff.stored_reals())
        }
    };
    let g_bar = &phi * phi.transpose();
    Ok(ApproxPoint { method, m: oana.m, budget, error: relative_approx_error(&g, &g_bar)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: usize,
    pub online: f64,
    pub comparator: f64,
    pub regret: f64,
}

/// Cumulative regularized online loss minus that of the best fixed model on
/// the given features, at each prefix length in `checkpoints`.
///
/// Only squared loss has the closed-form comparator used here.
pub fn regret_curve(
    log: &MetricsLog,
    features: &DenseMatrix,
    labels: &[f64],
    lambda: f64,
    loss: LossKind,
    checkpoints: &[usize],
) -> Result<Vec<RegretPoint>> {
    if loss != LossKind::Squared {
        return Err(Error::Unsupported(format!("regret comparator needs squared loss, got {loss}")));
    }
    let n = log.len();
    if features.nrows() != n || labels.len() != n {
        return Err(Error::invalid("log, features and labels must cover the same steps"));
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        if t == 0 || t > n {
            return Err(Error::invalid(format!("checkpoint {t} outside 1..={n}")));
        }
        let online: f64 = log.records()[..t]
            .iter()
            .map(|r| r.loss + 0.5 * lambda * r.weight_norm_sq)
            .sum();
        let phi = features.rows(0, t).into_owned();
        let y = DVector::from_column_slice(&labels[..t]);
        // argmin Σ_t λ/2‖w‖² + (y_t − w·φ_t)²
        let w = crate::numerics::solve_ridge(&phi, &y, 0.5 * lambda * t as f64)?;
        let resid = &phi * &w - &y;
        let comparator = resid.norm_squared() + 0.5 * lambda * t as f64 * w.norm_squared();
        out.push(RegretPoint { t, online, comparator, regret: online - comparator });
    }
    Ok(out)
}

pub fn regret_diagnostic(
    log: &MetricsLog,
    features: &DenseMatrix,
    labels: &[f64],
    lambda: f64,
    loss: LossKind,
) -> Result<f64> {
    Ok(regret_curve(log, features, labels, lambda, loss, &[log.len()])?[0].regret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::KernelConfig;
    use rand::{Rng, SeedableRng};

    #[test]
    fn approx_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = DenseMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
        let h = DenseMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(relative_approx_error(&g, &g).unwrap(), 0.0);
        assert_eq!(relative_approx_error(&g, &DenseMatrix::zeros(30, 30)).unwrap(), 1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..30 {
            for j in 0..30 {
                num += (g[(i, j)] - h[(i, j)]).powi(2);
                den += g[(i, j)].powi(2);
            }
        }
        let oracle = (num / den).sqrt();
        assert!((relative_approx_error(&g, &h).unwrap() - oracle).abs() < 1e-12);
        assert!(relative_approx_error(&DenseMatrix::zeros(2, 2), &g.view((0, 0), (2, 2)).into_owned()).is_err());
    }

    #[test]
    fn metrics_accumulators_match_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cls = MetricsLog::new(true);
        let mut reg = MetricsLog::new(false);
        for _ in 0..500 {
            let p: f64 = rng.random_range(-1.0..1.0);
            let y = if rng.random_bool(0.6) { 1.0 } else { -1.0 };
            cls.push(p, y, 0.0, false, 0, 0.0);
            reg.push(p, p + rng.random_range(-0.3..0.3), 0.0, true, 0, 0.0);
        }
        assert!((cls.final_metric() - cls.recompute_final()).abs() < 1e-10);
        assert!((reg.final_metric() - reg.recompute_final()).abs() < 1e-10);
        assert_eq!(reg.total_updates(), 500);
    }

    #[test]
    fn csv_layout() {
        let mut log = MetricsLog::new(true);
        log.push(0.5, 1.0, 0.5, true, 0, 0.0);
        log.push(-0.25, 1.0, 1.25, false, 0, 0.0);
        assert_eq!(
            log.to_csv(),
            "step,prediction,label,loss,cum_metric,updated,elapsed_ns\n1,0.5,1,0.5,1,1,0\n2,-0.25,1,1.25,0.5,0,0\n"
        );
    }

    #[test]
    fn self_representation_is_exact() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 * 0.1]).collect();
        let cfg = OanaConfig::new(6, f64::INFINITY, KernelConfig::gaussian(0.5).unwrap()).with_rank(6);
        let p = approx_experiment(&pts, ApproxMethod::Nogd, cfg, 6, 0).unwrap();
        assert!(p.error <= 1e-6, "error {}", p.error);
    }

    #[test]
    fn reservoir_is_sorted_subset() {
        let stream: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let k = reservoir_subset(&stream, 10, 3);
        assert_eq!(k.len(), 10);
        assert!(k.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(reservoir_subset(&stream, 10, 3), k);
    }

    #[test]
    fn regret_rejects_non_squared() {
        let log = MetricsLog::new(true);
        let f = DenseMatrix::zeros(0, 1);
        assert!(matches!(
            regret_diagnostic(&log, &f, &[], 0.1, LossKind::Hinge),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn regret_of_comparator_trajectory_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 80;
        let phi = DenseMatrix::from_fn(t, 4, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.05;
        let w = crate::numerics::solve_ridge(&phi, &DVector::from_vec(y.clone()), 0.5 * lambda * t as f64)
            .unwrap();
        let mut log = MetricsLog::new(false);
        for i in 0..t {
            let p: f64 = (0..4).map(|k| phi[(i, k)] * w[k]).sum();
            log.push(p, y[i], (y[i] - p).powi(2), false, 0, w.norm_squared());
        }
        let r = regret_diagnostic(&log, &phi, &y, lambda, LossKind::Squared).unwrap();
        assert!(r.abs() <= 1e-8, "regret {r}");
    }
}
