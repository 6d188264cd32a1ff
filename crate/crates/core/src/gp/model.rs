use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, MatRef, Par};
use rayon::prelude::*;

use super::likelihood::{log_det, solve};
use super::{factorize, kernel_matrix, matern52_profile, scaled_distance, KernelParams, TrainingSet};
use crate::error::{invalid, Result};

const BATCH: usize = 256;

/// A trained surrogate. Immutable; cheap to share between threads.
#[derive(Clone, Debug)]
pub struct GpModel {
    training: TrainingSet,
    params: KernelParams,
    jitter: f64,
    chol: Mat<f64>,
    /// Row-major packed copy of `chol` for single-point forward substitution.
    packed: Vec<f64>,
    alpha: Vec<f64>,
    inv_ls: Vec<f64>,
    log_likelihood: f64,
}

impl GpModel {
    /// Builds the model for fixed hyperparameters.
    pub fn new(training: TrainingSet, params: KernelParams) -> Result<Self> {
        params.validate()?;
        params.check_dim(training.dim())?;
        let factor = factorize(kernel_matrix(training.points(), &params), params.noise_sq)?;
        let r: Vec<f64> = training.values().iter().map(|y| y - params.mu0).collect();
        let alpha = solve(&factor.llt, &r);
        let quad: f64 = r.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let m = training.count();
        let log_likelihood = -0.5 * quad
            - 0.5 * log_det(&factor.llt)
            - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
        let chol = factor.llt.L().to_owned();
        let mut packed = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in 0..=i {
                packed.push(chol[(i, j)]);
            }
        }
        let inv_ls = params.length_scales.iter().map(|l| 1.0 / l).collect();
        Ok(Self { training, params, jitter: factor.jitter, chol, packed, alpha, inv_ls, log_likelihood })
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.training.dim()
    }

    /// Diagonal jitter that was needed on top of `noise_sq`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Lower Cholesky factor of `K + (noise_sq + jitter)·I`.
    pub fn cholesky(&self) -> MatRef<'_, f64> {
        self.chol.as_ref()
    }

    /// `(K + σn²I)⁻¹ (Y − μ0·1)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(invalid(format!(
                "query has dimension {}, model expects {}",
                p.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn cross_covariance(&self, p: &[f64]) -> Vec<f64> {
        let s2 = self.params.sigma0_sq;
        self.training
            .points()
            .iter()
            .map(|x| s2 * matern52_profile(scaled_distance(p, x, &self.inv_ls)))
            .collect()
    }

    fn mean_from(&self, k: &[f64]) -> f64 {
        self.params.mu0 + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
    }

    fn clamp_variance(&self, v: f64) -> f64 {
        v.clamp(0.0, self.params.sigma0_sq)
    }

    /// Predictive mean and variance at `p`. The variance is clamped to
    /// `[0, sigma0_sq]`.
    pub fn predict(&self, p: &[f64]) -> Result<(f64, f64)> {
        self.check(p)?;
        let k = self.cross_covariance(p);
        let mean = self.mean_from(&k);
        let m = k.len();
        let mut v = vec![0.0; m];
        let mut norm = 0.0;
        let mut row = 0;
        for i in 0..m {
            let li = &self.packed[row..row + i + 1];
            let mut acc = k[i];
            for j in 0..i {
                acc -= li[j] * v[j];
            }
            let vi = acc / li[i];
            v[i] = vi;
            norm += vi * vi;
            row += i + 1;
        }
        Ok((mean, self.clamp_variance(self.params.sigma0_sq - norm)))
    }

    /// Predictive mean only; `O(M)` per query.
    pub fn predict_mean(&self, p: &[f64]) -> Result<f64> {
        self.check(p)?;
        let s2 = self.params.sigma0_sq;
        let mut acc = 0.0;
        for (x, a) in self.training.points().iter().zip(&self.alpha) {
            acc += a * s2 * matern52_profile(scaled_distance(p, x, &self.inv_ls));
        }
        Ok(self.params.mu0 + acc)
    }

    /// Means for many queries.
    pub fn predict_mean_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.iter().try_for_each(|p| self.check(p))?;
        Ok(points
            .par_iter()
            .map(|p| self.predict_mean(p).expect("dimension checked"))
            .collect())
    }

    /// Means and variances for many queries using blocked triangular solves.
    pub fn predict_batch(&self, points: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        points.iter().try_for_each(|p| self.check(p))?;
        let m = self.training.count();
        let chunks: Vec<Vec<(f64, f64)>> = points
            .par_chunks(BATCH)
            .map(|chunk| {
                let mut kstar = Mat::<f64>::zeros(m, chunk.len());
                let mut means = Vec::with_capacity(chunk.len());
                for (c, p) in chunk.iter().enumerate() {
                    let k = self.cross_covariance(p);
                    means.push(self.mean_from(&k));
                    for (i, v) in k.into_iter().enumerate() {
                        kstar[(i, c)] = v;
                    }
                }
                solve_lower_triangular_in_place(self.chol.as_ref(), kstar.as_mut(), Par::Seq);
                means
                    .into_iter()
                    .enumerate()
                    .map(|(c, mean)| {
                        let col = kstar.col_as_slice(c);
                        let norm: f64 = col.iter().map(|v| v * v).sum();
                        (mean, self.clamp_variance(self.params.sigma0_sq - norm))
                    })
                    .collect()
            })
            .collect();
        Ok(chunks.into_iter().flatten().collect())
    }
}
