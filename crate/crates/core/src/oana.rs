//! Online adaptive landmark maintenance.
//!
//! Landmarks are online-kmeans centroids. A stream point moves its nearest
//! centroid only when it lies at squared distance at least `epsilon`; each
//! move is a rank-2 change of the landmark kernel matrix, absorbed by a
//! warm-started refresh of the truncated eigendecomposition.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    kernel_cross, pinv_sqrt, truncated_eig, warmstart_randomized_eig, DenseMatrix, EigPair,
    KernelConfig, DEFAULT_PINV_REL_TOL, DEFAULT_POWER_ITERS,
};

/// Default feature rank for `m` landmarks: `round(0.8 m)`, at least 1.
pub fn default_rank(m: usize) -> usize {
    ((0.8 * m as f64).round() as usize).clamp(1, m.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OanaConfig {
    pub m: usize,
    pub r: usize,
    /// Squared-distance gate in raw feature units. `f64::INFINITY` freezes the landmarks.
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub kernel: KernelConfig,
    pub power_iters: usize,
    pub pinv_rel_tol: f64,
}

impl OanaConfig {
    pub fn new(m: usize, epsilon: f64, kernel: KernelConfig) -> Self {
        Self {
            m,
            r: default_rank(m),
            epsilon,
            kernel,
            power_iters: DEFAULT_POWER_ITERS,
            pinv_rel_tol: DEFAULT_PINV_REL_TOL,
        }
    }

    pub fn with_rank(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("need at least one landmark"));
        }
        if self.r == 0 || self.r > self.m {
            return Err(Error::invalid(format!("rank {} outside 1..={}", self.r, self.m)));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.power_iters == 0 {
            return Err(Error::invalid("need at least one power iteration"));
        }
        if !(self.pinv_rel_tol >= 0.0 && self.pinv_rel_tol < 1.0) {
            return Err(Error::invalid("pinv_rel_tol must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// The Nyström feature map `x ↦ k(x, M) U_r S_r^{-1/2}` for a fixed landmark set.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromMap {
    landmarks: DenseMatrix,
    vectors: DenseMatrix,
    inv_sqrt: Vec<f64>,
    kernel: KernelConfig,
}

impl NystromMap {
    pub fn dim(&self) -> usize {
        self.landmarks.ncols()
    }

    pub fn rank(&self) -> usize {
        self.inv_sqrt.len()
    }

    pub fn landmarks(&self) -> &DenseMatrix {
        &self.landmarks
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "sample has dimension {}, landmarks have {}",
                x.len(),
                self.dim()
            )));
        }
        let m = self.landmarks.nrows();
        let krow: Vec<f64> = (0..m)
            .map(|j| self.kernel.eval_row(x, self.landmarks.row(j).iter()))
            .collect();
        let mut out = vec![0.0; self.rank()];
        for (k, o) in out.iter_mut().enumerate() {
            if self.inv_sqrt[k] == 0.0 {
                continue;
            }
            let col = self.vectors.column(k);
            let mut acc = 0.0;
            for j in 0..m {
                acc += krow[j] * col[j];
            }
            *o = acc * self.inv_sqrt[k];
        }
        Ok(out)
    }

    /// Features for every row of `points`, one row per point.
    pub fn features_matrix(&self, points: &DenseMatrix) -> Result<DenseMatrix> {
        if points.ncols() != self.dim() {
            return Err(Error::invalid("point matrix dimension mismatch"));
        }
        let c = kernel_cross(points, &self.landmarks, &self.kernel)?;
        let mut phi = c * &self.vectors;
        for (k, mut col) in phi.column_iter_mut().enumerate() {
            col *= self.inv_sqrt[k];
        }
        Ok(phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Unchanged,
    Updated { q: usize, old_centroid: Vec<f64>, new_centroid: Vec<f64> },
}

impl UpdateOutcome {
    pub fn is_updated(&self) -> bool {
        matches!(self, UpdateOutcome::Updated { .. })
    }
}

/// The budgeted landmark state: centroids, their counts, and the truncated
/// eigendecomposition of their kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkState {
    map: NystromMap,
    values: DVector<f64>,
    counts: Vec<u64>,
    config: OanaConfig,
}

impl LandmarkState {
    /// Seed the centroids with the `m` warm-up points and factor their kernel matrix.
    pub fn init(warmup: &[Vec<f64>], config: OanaConfig) -> Result<Self> {
        config.validate()?;
        if warmup.len() < config.m {
            return Err(Error::InsufficientWarmup { needed: config.m, got: warmup.len() });
        }
        let warmup = &warmup[..config.m];
        let d = warmup[0].len();
        if d == 0 || warmup.iter().any(|x| x.len() != d) {
            return Err(Error::invalid("warm-up samples must share a positive dimension"));
        }
        let landmarks = DenseMatrix::from_fn(config.m, d, |i, j| warmup[i][j]);
        let e = kernel_cross(&landmarks, &landmarks, &config.kernel)?;
        let eig = truncated_eig(&e, config.r)?;
        Self::from_parts(landmarks, vec![1; config.m], eig, config)
    }

    pub(crate) fn from_parts(
        landmarks: DenseMatrix,
        counts: Vec<u64>,
        eig: EigPair,
        config: OanaConfig,
    ) -> Result<Self> {
        config.validate()?;
        if landmarks.nrows() != config.m
            || counts.len() != config.m
            || eig.dim() != config.m
            || eig.rank() != config.r
        {
            return Err(Error::invalid("landmark state parts have inconsistent shapes"));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::invalid("cluster counts must be positive"));
        }
        let inv_sqrt = pinv_sqrt(eig.values.as_slice(), config.pinv_rel_tol)?;
        let map = NystromMap { landmarks, vectors: eig.vectors, inv_sqrt, kernel: config.kernel };
        Ok(Self { map, values: eig.values, counts, config })
    }

    pub fn config(&self) -> &OanaConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn r(&self) -> usize {
        self.config.r
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn landmarks(&self) -> &DenseMatrix {
        &self.map.landmarks
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn eig(&self) -> EigPair {
        EigPair { vectors: self.map.vectors.clone(), values: self.values.clone() }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn map(&self) -> &NystromMap {
        &self.map
    }

    /// Stored reals: landmarks, eigenvectors, counts, eigenvalues. The
    /// inverse-root cache is derived from the eigenvalues and not counted.
    pub fn stored_reals(&self) -> usize {
        self.map.landmarks.len() + self.map.vectors.len() + self.counts.len() + self.values.len()
    }

    /// Nearest centroid by squared Euclidean distance, lowest index on ties.
    pub fn nearest_landmark(&self, x: &[f64]) -> Result<(usize, f64)> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "sample has dimension {}, landmarks have {}",
                x.len(),
                self.dim()
            )));
        }
        let mut best = (0, f64::INFINITY);
        for q in 0..self.m() {
            let mut acc = 0.0;
            for (a, b) in x.iter().zip(self.map.landmarks.row(q).iter()) {
                let d = a - b;
                acc += d * d;
            }
            if acc < best.1 {
                best = (q, acc);
            }
        }
        Ok(best)
    }

    /// Whether `x` would move its nearest centroid.
    pub fn gate_opens(&self, x: &[f64]) -> Result<bool> {
        let (_, dist) = self.nearest_landmark(x)?;
        Ok(dist >= self.config.epsilon)
    }

    /// `(a, b)` with `E_new = E + a bᵀ + b aᵀ` when centroid `q` becomes `new_u`.
    pub fn rank2_delta(&self, q: usize, new_u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.m();
        if q >= m {
            return Err(Error::invalid(format!("cluster index {q} out of range 0..{m}")));
        }
        if new_u.len() != self.dim() {
            return Err(Error::invalid("replacement centroid dimension mismatch"));
        }
        let kernel = &self.config.kernel;
        let old_u: Vec<f64> = self.map.landmarks.row(q).iter().copied().collect();
        let mut a = vec![0.0; m];
        a[q] = 1.0;
        let b = (0..m)
            .map(|j| {
                if j == q {
                    (kernel.eval(new_u, new_u) - kernel.eval(&old_u, &old_u)) / 2.0
                } else {
                    let row = self.map.landmarks.row(j);
                    kernel.eval_row(new_u, row.iter()) - kernel.eval_row(&old_u, row.iter())
                }
            })
            .collect();
        Ok((a, b))
    }

    /// Apply the gated online-kmeans step for `x`, refreshing the factors on a move.
    pub fn maybe_update_landmarks(&mut self, x: &[f64]) -> Result<UpdateOutcome> {
        let (q, dist) = self.nearest_landmark(x)?;
        if dist < self.config.epsilon {
            return Ok(UpdateOutcome::Unchanged);
        }
        let n = self.counts[q] as f64;
        let old_centroid: Vec<f64> = self.map.landmarks.row(q).iter().copied().collect();
        let new_centroid: Vec<f64> = old_centroid
            .iter()
            .zip(x)
            .map(|(u, xi)| (n * u + xi) / (n + 1.0))
            .collect();

        let (a, b) = self.rank2_delta(q, &new_centroid)?;
        let eig = warmstart_randomized_eig(&self.eig(), &a, &b, self.config.power_iters, self.r())?;
        let inv_sqrt = pinv_sqrt(eig.values.as_slice(), self.config.pinv_rel_tol)?;

        for (j, v) in new_centroid.iter().enumerate() {
            self.map.landmarks[(q, j)] = *v;
        }
        self.counts[q] += 1;
        self.map.vectors = eig.vectors;
        self.map.inv_sqrt = inv_sqrt;
        self.values = eig.values;
        Ok(UpdateOutcome::Updated { q, old_centroid, new_centroid })
    }

    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.map.features(x)
    }

    /// Kernel matrix of the current landmarks, recomputed from scratch.
    pub fn landmark_kernel(&self) -> Result<DenseMatrix> {
        kernel_cross(&self.map.landmarks, &self.map.landmarks, &self.config.kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(points: &[Vec<f64>], r: usize, epsilon: f64, gamma: f64) -> LandmarkState {
        let cfg = OanaConfig::new(points.len(), epsilon, KernelConfig::gaussian(gamma).unwrap())
            .with_rank(r);
        LandmarkState::init(points, cfg).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn single_landmark() {
        let s = state(&[vec![0.5, 0.5]], 1, 0.0, 1.0);
        assert_eq!(s.eigenvalues().as_slice(), &[1.0]);
        let x = [1.0, 0.0];
        let phi = s.feature_map(&x).unwrap();
        assert_eq!(phi.len(), 1);
        assert!((phi[0] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn init_reconstructs_kernel_and_counts() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]];
        let s = state(&pts, 3, 0.0, 0.7);
        let e = s.landmark_kernel().unwrap();
        assert!((e - s.eig().reconstruct()).norm() <= 1e-8);
        assert_eq!(s.counts(), &[1, 1, 1]);
    }

    #[test]
    fn init_needs_m_samples() {
        let cfg = OanaConfig::new(3, 0.0, KernelConfig::gaussian(1.0).unwrap());
        let err = LandmarkState::init(&[vec![0.0], vec![1.0]], cfg).unwrap_err();
        assert!(matches!(err, Error::InsufficientWarmup { needed: 3, got: 2 }));
    }

    #[test]
    fn duplicate_landmarks_are_permitted() {
        let s = state(&[vec![1.0], vec![1.0], vec![2.0]], 3, 0.0, 1.0);
        let phi = s.feature_map(&[1.5]).unwrap();
        assert!(phi.iter().all(|v| v.is_finite()));
        assert_eq!(s.map().inv_sqrt.iter().filter(|&&v| v == 0.0).count(), 1);
    }

    #[test]
    fn nearest_by_hand_and_ties() {
        let s = state(&[vec![0.0], vec![10.0]], 2, 0.0, 0.01);
        assert_eq!(s.nearest_landmark(&[1.0]).unwrap(), (0, 1.0));
        assert_eq!(s.nearest_landmark(&[5.0]).unwrap().0, 0);
        assert!(s.nearest_landmark(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 100, 5);
        let s = state(&pts, 10, 0.0, 0.5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut best = (usize::MAX, f64::INFINITY);
            for (i, p) in pts.iter().enumerate() {
                let d: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.1 {
                    best = (i, d);
                }
            }
            assert_eq!(s.nearest_landmark(&x).unwrap(), best);
        }
    }

    #[test]
    fn gate_behaviour() {
        let mut s = state(&[vec![0.0, 0.0], vec![3.0, 3.0]], 2, 0.0, 0.3);
        assert!(s.maybe_update_landmarks(&[0.0, 0.0]).unwrap().is_updated());

        let mut s = state(&[vec![0.0, 0.0], vec![3.0, 3.0]], 2, 0.5, 0.3);
        let before = s.clone();
        assert_eq!(s.maybe_update_landmarks(&[3.0, 3.0]).unwrap(), UpdateOutcome::Unchanged);
        assert_eq!(s, before);
    }

    #[test]
    fn centroid_update_by_hand() {
        let mut s = state(&[vec![1.0, 1.0], vec![-9.0, -9.0]], 2, 1.0, 0.1);
        s.counts[0] = 3;
        let out = s.maybe_update_landmarks(&[5.0, 5.0]).unwrap();
        assert_eq!(
            out,
            UpdateOutcome::Updated { q: 0, old_centroid: vec![1.0, 1.0], new_centroid: vec![2.0, 2.0] }
        );
        assert_eq!(s.counts()[0], 4);
        assert_eq!(s.landmarks().row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 2.0]);
    }

    #[test]
    fn rank2_delta_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(&mut rng, 10, 3);
        let s = state(&pts, 8, 0.0, 0.9);
        let new_u = vec![0.1, 0.2, -0.3];
        let (a, b) = s.rank2_delta(4, &new_u).unwrap();
        let mut e4 = vec![0.0; 10];
        e4[4] = 1.0;
        assert_eq!(a, e4);
        assert_eq!(b[4], 0.0);
        assert!(s.rank2_delta(10, &new_u).is_err());
    }

    #[test]
    fn eps_infinite_never_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = random_points(&mut rng, 6, 2);
        let mut s = state(&pts, 4, f64::INFINITY, 1.0);
        let before = s.clone();
        for x in random_points(&mut rng, 50, 2) {
            assert!(!s.maybe_update_landmarks(&x).unwrap().is_updated());
        }
        assert_eq!(s, before);
    }
}
