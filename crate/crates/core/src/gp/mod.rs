//! Gaussian-process regression with a constant prior mean and a Matérn 5/2
//! kernel with one length scale per input dimension.
//!
//! The kernel amplitude is the prior *variance* `sigma0_sq`, so the predictive
//! variance `sigma0_sq - kᵀK⁻¹k` tends to `sigma0_sq` far from the data.

mod fit;
mod likelihood;
mod model;

pub use fit::{fit, fit_with, FitOptions};
pub(crate) use likelihood::FixedKernelLikelihood;
pub use likelihood::{log_marginal_likelihood, log_marginal_likelihood_gradient, LikelihoodGradient};
pub use model::GpModel;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Observations of one scalar quantity at distinct input points.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    dim: usize,
}

impl TrainingSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("training set is empty"));
        }
        if points.len() != values.len() {
            return Err(invalid(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(invalid("training points have dimension 0"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(invalid(format!("point {i} has dimension {}, expected {dim}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("value {i} is not finite")));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(invalid(format!("points {} and {} coincide", w[0], w[1])));
            }
        }
        Ok(Self { points, values, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Same points with different observations.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.count() {
            return Err(invalid("replacement values have the wrong length"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("value {i} is not finite")));
        }
        Ok(Self { points: self.points.clone(), values, dim: self.dim })
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            dim: self.dim,
        }
    }
}

/// Kernel and prior hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub length_scales: Vec<f64>,
    pub noise_sq: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(invalid("mu0 must be finite"));
        }
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) {
            return Err(invalid(format!("sigma0_sq must be positive, got {}", self.sigma0_sq)));
        }
        if self.length_scales.is_empty() {
            return Err(invalid("at least one length scale is required"));
        }
        if let Some(l) = self.length_scales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid(format!("length scales must be positive, got {l}")));
        }
        if !(self.noise_sq >= 0.0 && self.noise_sq.is_finite()) {
            return Err(invalid(format!("noise_sq must be non-negative, got {}", self.noise_sq)));
        }
        Ok(())
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.length_scales.len() != dim {
            return Err(invalid(format!(
                "{} length scales for {dim}-dimensional inputs",
                self.length_scales.len()
            )));
        }
        Ok(())
    }
}

/// Matérn 5/2 covariance between `p` and `q`.
pub fn matern52(p: &[f64], q: &[f64], params: &KernelParams) -> Result<f64> {
    if p.len() != q.len() || p.len() != params.length_scales.len() {
        return Err(invalid(format!(
            "dimension mismatch: |p|={}, |q|={}, {} length scales",
            p.len(),
            q.len(),
            params.length_scales.len()
        )));
    }
    let inv: Vec<f64> = params.length_scales.iter().map(|l| 1.0 / l).collect();
    Ok(params.sigma0_sq * matern52_profile(scaled_distance(p, q, &inv)))
}

/// `(1 + √5 r + 5r²/3)·exp(−√5 r)`.
#[inline]
pub(crate) fn matern52_profile(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

#[inline]
pub(crate) fn scaled_distance(p: &[f64], q: &[f64], inv_ls: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        let d = (p[i] - q[i]) * inv_ls[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Signal covariance matrix (without noise) over the training points.
pub(crate) fn kernel_matrix(points: &[Vec<f64>], params: &KernelParams) -> Mat<f64> {
    let m = points.len();
    let inv: Vec<f64> = params.length_scales.iter().map(|l| 1.0 / l).collect();
    let mut k = Mat::<f64>::zeros(m, m);
    for j in 0..m {
        k[(j, j)] = params.sigma0_sq;
        for i in (j + 1)..m {
            let v = params.sigma0_sq * matern52_profile(scaled_distance(&points[i], &points[j], &inv));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `K + (noise_sq + jitter)·I`.
pub(crate) struct Factor {
    pub llt: faer::linalg::solvers::Llt<f64>,
    /// Jitter that was added on top of `noise_sq`.
    pub jitter: f64,
}

/// Factorizes `k + noise_sq·I`, escalating diagonal jitter from
/// `1e-12·trace/M` by factors of ten up to `1e-6·trace/M` on failure.
pub(crate) fn factorize(mut k: Mat<f64>, noise_sq: f64) -> Result<Factor> {
    let m = k.nrows();
    for i in 0..m {
        k[(i, i)] += noise_sq;
    }
    let diag: Vec<f64> = (0..m).map(|i| k[(i, i)]).collect();
    if let Ok(llt) = k.llt(Side::Lower) {
        return Ok(Factor { llt, jitter: 0.0 });
    }
    let scale = diag.iter().map(|d| d.abs()).sum::<f64>() / m as f64;
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mut jitter = 1e-12 * scale;
    let mut last = 0.0;
    while jitter <= 1e-6 * scale * (1.0 + 1e-9) {
        for i in 0..m {
            k[(i, i)] = diag[i] + jitter;
        }
        if let Ok(llt) = k.llt(Side::Lower) {
            return Ok(Factor { llt, jitter });
        }
        last = jitter;
        jitter *= 10.0;
    }
    for i in 0..m {
        k[(i, i)] = diag[i];
    }
    let min_eigenvalue = k
        .self_adjoint_eigenvalues(Side::Lower)
        .ok()
        .and_then(|v| v.first().copied())
        .unwrap_or(f64::NAN);
    Err(Error::Conditioning { jitter: last, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(sigma0_sq: f64, ls: Vec<f64>) -> KernelParams {
        KernelParams { mu0: 0.0, sigma0_sq, length_scales: ls, noise_sq: 0.0 }
    }

    #[test]
    fn kernel_at_zero_distance_is_prior_variance() {
        let p = params(2.5, vec![0.3, 4.0]);
        assert_eq!(matern52(&[1.0, 2.0], &[1.0, 2.0], &p).unwrap(), 2.5);
    }

    #[test]
    fn kernel_unit_distance_value() {
        // (1 + √5 + 5/3)·e^{−√5}, evaluated independently to 10 digits.
        let expected = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((expected - 0.523_994_108_8).abs() < 1e-9);
        let v = matern52(&[0.0], &[1.0], &params(1.0, vec![1.0])).unwrap();
        assert!((v - expected).abs() < 1e-15);
        let scaled = matern52(&[0.0], &[2.0], &params(1.0, vec![2.0])).unwrap();
        assert_eq!(v, scaled);
    }

    #[test]
    fn kernel_dimension_mismatch_is_rejected() {
        assert!(matern52(&[0.0, 1.0], &[1.0], &params(1.0, vec![1.0])).is_err());
        assert!(matern52(&[0.0, 1.0], &[1.0, 1.0], &params(1.0, vec![1.0])).is_err());
    }

    #[test]
    fn duplicate_training_points_are_rejected() {
        let r = TrainingSet::new(vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![0.0, 1.0]], vec![1.0, 2.0, 3.0]);
        assert!(r.is_err());
        assert!(TrainingSet::new(vec![vec![0.0], vec![1.0, 2.0]], vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::new(vec![vec![0.0]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..5 {
            let dim = 1 + trial;
            let pts: Vec<Vec<f64>> = (0..64).map(|_| (0..dim).map(|_| next() * 3.0).collect()).collect();
            let p = params(1.7, (0..dim).map(|_| 0.2 + next()).collect());
            let k = kernel_matrix(&pts, &p);
            let eig = k.self_adjoint_eigenvalues(Side::Lower).unwrap();
            assert!(eig[0] >= -1e-8 * p.sigma0_sq, "min eigenvalue {}", eig[0]);
        }
    }

    #[test]
    fn jitter_rescues_singular_matrix() {
        // Rank-one matrix: plain Cholesky meets a zero pivot.
        let mut k = Mat::<f64>::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                k[(i, j)] = 1.0;
            }
        }
        let f = factorize(k, 0.0).unwrap();
        assert!(f.jitter > 0.0 && f.jitter <= 1e-6, "jitter {}", f.jitter);
    }

    #[test]
    fn hopeless_matrix_reports_eigenvalue() {
        let mut k = Mat::<f64>::zeros(2, 2);
        k[(0, 0)] = 1.0;
        k[(1, 1)] = -1.0;
        match factorize(k, 0.0) {
            Err(Error::Conditioning { min_eigenvalue, .. }) => assert!(min_eigenvalue < -0.9),
            other => panic!("unexpected {:?}", other.map(|f| f.jitter)),
        }
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric_and_bounded(
            p in proptest::collection::vec(-10.0f64..10.0, 3),
            q in proptest::collection::vec(-10.0f64..10.0, 3),
            l in proptest::collection::vec(0.01f64..10.0, 3),
            s in 0.01f64..100.0,
        ) {
            let par = params(s, l);
            let a = matern52(&p, &q, &par).unwrap();
            let b = matern52(&q, &p, &par).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0 && a <= s);
        }
    }
}
