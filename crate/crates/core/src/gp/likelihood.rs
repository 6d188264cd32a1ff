use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::Mat;

use super::{factorize, kernel_matrix, scaled_distance, KernelParams, TrainingSet, SQRT5};
use crate::error::Result;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Partial derivatives of the log marginal likelihood with respect to the raw
/// hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodGradient {
    pub d_mu0: f64,
    pub d_sigma0_sq: f64,
    pub d_length_scales: Vec<f64>,
}

pub(crate) fn solve(llt: &Llt<f64>, rhs: &[f64]) -> Vec<f64> {
    let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    llt.solve_in_place(b.as_mut());
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

pub(crate) fn log_det(llt: &Llt<f64>) -> f64 {
    let l = llt.L();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// `−½ rᵀ(K+σn²I)⁻¹r − ½ log det(K+σn²I) − (M/2) log 2π` with `r = Y − μ0`.
pub fn log_marginal_likelihood(training: &TrainingSet, params: &KernelParams) -> Result<f64> {
    params.validate()?;
    params.check_dim(training.dim())?;
    let factor = factorize(kernel_matrix(training.points(), params), params.noise_sq)?;
    let r: Vec<f64> = training.values().iter().map(|y| y - params.mu0).collect();
    let alpha = solve(&factor.llt, &r);
    Ok(assemble(&r, &alpha, log_det(&factor.llt)))
}

fn assemble(r: &[f64], alpha: &[f64], logdet: f64) -> f64 {
    let quad: f64 = r.iter().zip(alpha).map(|(a, b)| a * b).sum();
    -0.5 * quad - 0.5 * logdet - 0.5 * r.len() as f64 * LN_2PI
}

/// Log marginal likelihood and its analytic gradient.
pub fn log_marginal_likelihood_gradient(
    training: &TrainingSet,
    params: &KernelParams,
) -> Result<(f64, LikelihoodGradient)> {
    params.validate()?;
    params.check_dim(training.dim())?;
    let k = kernel_matrix(training.points(), params);
    let factor = factorize(k.clone(), params.noise_sq)?;
    let r: Vec<f64> = training.values().iter().map(|y| y - params.mu0).collect();
    let alpha = solve(&factor.llt, &r);
    let ll = assemble(&r, &alpha, log_det(&factor.llt));
    let kinv = factor.llt.inverse();
    let (d_sigma0_sq, d_length_scales) = kernel_gradient(training.points(), params, &k, &kinv, &alpha);
    Ok((ll, LikelihoodGradient { d_mu0: alpha.iter().sum(), d_sigma0_sq, d_length_scales }))
}

/// `½ tr((ααᵀ − K⁻¹) ∂K/∂θ)` for the amplitude and every length scale.
fn kernel_gradient(
    points: &[Vec<f64>],
    params: &KernelParams,
    k: &Mat<f64>,
    kinv: &Mat<f64>,
    alpha: &[f64],
) -> (f64, Vec<f64>) {
    let m = points.len();
    let dim = params.length_scales.len();
    let inv: Vec<f64> = params.length_scales.iter().map(|l| 1.0 / l).collect();
    let s2 = params.sigma0_sq;
    let mut amp_diag = 0.0;
    let mut amp_off = 0.0;
    let mut acc = vec![0.0; dim];
    for j in 0..m {
        amp_diag += (alpha[j] * alpha[j] - kinv[(j, j)]) * s2;
        let pj = &points[j];
        for i in (j + 1)..m {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            amp_off += w * k[(i, j)];
            let pi = &points[i];
            let r = scaled_distance(pi, pj, &inv);
            let sr = SQRT5 * r;
            let c = w * s2 * (5.0 / 3.0) * (1.0 + sr) * (-sr).exp();
            for d in 0..dim {
                let delta = pi[d] - pj[d];
                acc[d] += c * delta * delta;
            }
        }
    }
    let d_s2 = 0.5 * (amp_diag + 2.0 * amp_off) / s2;
    let d_l = acc.iter().zip(&inv).map(|(a, il)| a * il * il * il).collect();
    (d_s2, d_l)
}

/// Likelihood with `μ0` at its generalized-least-squares optimum, and its
/// gradient in log coordinates `[ln σ0², ln l_1, …]`.
pub(crate) struct ProfileEval {
    pub ll: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub mu0: f64,
    pub grad_log: Vec<f64>,
}

pub(crate) fn profile_eval(training: &TrainingSet, log_params: &[f64], noise_sq: f64) -> Option<ProfileEval> {
    let params = KernelParams {
        mu0: 0.0,
        sigma0_sq: log_params[0].exp(),
        length_scales: log_params[1..].iter().map(|v| v.exp()).collect(),
        noise_sq,
    };
    let k = kernel_matrix(training.points(), &params);
    let factor = factorize(k.clone(), noise_sq).ok()?;
    let m = training.count();
    let a = solve(&factor.llt, &vec![1.0; m]);
    let b = solve(&factor.llt, training.values());
    let mu0 = b.iter().sum::<f64>() / a.iter().sum::<f64>();
    let alpha: Vec<f64> = b.iter().zip(&a).map(|(bi, ai)| bi - mu0 * ai).collect();
    let r: Vec<f64> = training.values().iter().map(|y| y - mu0).collect();
    let ll = assemble(&r, &alpha, log_det(&factor.llt));
    if !ll.is_finite() {
        return None;
    }
    let kinv = factor.llt.inverse();
    let (d_s2, d_l) = kernel_gradient(training.points(), &params, &k, &kinv, &alpha);
    let mut grad_log = Vec::with_capacity(log_params.len());
    grad_log.push(d_s2 * params.sigma0_sq);
    grad_log.extend(d_l.iter().zip(&params.length_scales).map(|(g, l)| g * l));
    Some(ProfileEval { ll, mu0, grad_log })
}

/// Profile likelihood for many observation vectors sharing one kernel matrix.
pub(crate) struct FixedKernelLikelihood {
    llt: Llt<f64>,
    logdet: f64,
    kinv_one: Vec<f64>,
    one_kinv_one: f64,
}

impl FixedKernelLikelihood {
    pub fn new(points: &[Vec<f64>], params: &KernelParams) -> Result<Self> {
        let factor = factorize(kernel_matrix(points, params), params.noise_sq)?;
        let kinv_one = solve(&factor.llt, &vec![1.0; points.len()]);
        let one_kinv_one = kinv_one.iter().sum();
        let logdet = log_det(&factor.llt);
        Ok(Self { llt: factor.llt, logdet, kinv_one, one_kinv_one })
    }

    /// Returns the log likelihood and the profiled `μ0`.
    pub fn evaluate(&self, y: &[f64]) -> (f64, f64) {
        let b = solve(&self.llt, y);
        let mu0 = b.iter().sum::<f64>() / self.one_kinv_one;
        let alpha: Vec<f64> = b.iter().zip(&self.kinv_one).map(|(bi, ai)| bi - mu0 * ai).collect();
        let r: Vec<f64> = y.iter().map(|v| v - mu0).collect();
        (assemble(&r, &alpha, self.logdet), mu0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::matern52;

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn single_point_at_prior_mean() {
        let t = TrainingSet::new(vec![vec![0.3]], vec![2.0]).unwrap();
        let p = KernelParams { mu0: 2.0, sigma0_sq: 1.0, length_scales: vec![1.0], noise_sq: 0.0 };
        let ll = log_marginal_likelihood(&t, &p).unwrap();
        assert!((ll - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
        assert!((ll + 0.918_938_533_2).abs() < 1e-9);
    }

    #[test]
    fn noise_never_increases_data_fit_term() {
        let t = TrainingSet::new(vec![vec![0.0]], vec![3.0]).unwrap();
        let mut prev = f64::INFINITY;
        for noise in [0.0, 0.1, 0.2, 0.4, 0.8, 1.6] {
            let p = KernelParams { mu0: 1.0, sigma0_sq: 1.0, length_scales: vec![1.0], noise_sq: noise };
            let data_fit = 4.0 / (1.0 + noise);
            assert!(data_fit <= prev);
            prev = data_fit;
            let expected = -0.5 * data_fit - 0.5 * (1.0 + noise).ln() - 0.5 * LN_2PI;
            assert!((log_marginal_likelihood(&t, &p).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_data_away_from_mean_lowers_likelihood() {
        let mut rnd = lcg(5);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| vec![rnd(), rnd()]).collect();
        let vals: Vec<f64> = (0..6).map(|_| rnd()).collect();
        let p = KernelParams { mu0: 0.0, sigma0_sq: 1.0, length_scales: vec![0.5, 0.5], noise_sq: 0.0 };
        let mut prev = f64::INFINITY;
        for shift in [0.0, 0.5, 1.0, 2.0] {
            let t = TrainingSet::new(pts.clone(), vals.iter().map(|v| v + 10.0 + shift).collect()).unwrap();
            let ll = log_marginal_likelihood(&t, &p).unwrap();
            assert!(ll < prev);
            prev = ll;
        }
    }

    /// Dense oracle: explicit inverse by Gauss-Jordan elimination and
    /// determinant by LU, independent of the Cholesky path.
    fn dense_oracle(t: &TrainingSet, p: &KernelParams) -> f64 {
        let m = t.count();
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        matern52(&t.points()[i], &t.points()[j], p).unwrap()
                            + if i == j { p.noise_sq } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let mut inv: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| (i == j) as u8 as f64).collect()).collect();
        let mut det = 1.0;
        for c in 0..m {
            let piv = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
            if piv != c {
                a.swap(piv, c);
                inv.swap(piv, c);
                det = -det;
            }
            let d = a[c][c];
            det *= d;
            for j in 0..m {
                a[c][j] /= d;
                inv[c][j] /= d;
            }
            for i in 0..m {
                if i != c {
                    let f = a[i][c];
                    for j in 0..m {
                        a[i][j] -= f * a[c][j];
                        inv[i][j] -= f * inv[c][j];
                    }
                }
            }
        }
        let r: Vec<f64> = t.values().iter().map(|y| y - p.mu0).collect();
        let mut quad = 0.0;
        for i in 0..m {
            for j in 0..m {
                quad += r[i] * inv[i][j] * r[j];
            }
        }
        -0.5 * quad - 0.5 * det.ln() - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rnd = lcg(99);
        for _ in 0..5 {
            let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rnd() * 2.0, rnd()]).collect();
            let vals: Vec<f64> = (0..5).map(|_| rnd() * 3.0 - 1.0).collect();
            let t = TrainingSet::new(pts, vals).unwrap();
            let p = KernelParams {
                mu0: rnd() - 0.5,
                sigma0_sq: 0.5 + rnd(),
                length_scales: vec![0.3 + rnd(), 0.3 + rnd()],
                noise_sq: 1e-3 * rnd(),
            };
            let a = log_marginal_likelihood(&t, &p).unwrap();
            let b = dense_oracle(&t, &p);
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn profiled_mean_maximizes_over_mu0() {
        let mut rnd = lcg(3);
        let pts: Vec<Vec<f64>> = (0..8).map(|_| vec![rnd()]).collect();
        let vals: Vec<f64> = (0..8).map(|_| 4.0 + rnd()).collect();
        let t = TrainingSet::new(pts, vals).unwrap();
        let e = profile_eval(&t, &[0.0, (0.3f64).ln()], 0.0).unwrap();
        let p = |mu0| KernelParams { mu0, sigma0_sq: 1.0, length_scales: vec![0.3], noise_sq: 0.0 };
        let (ll, g) = log_marginal_likelihood_gradient(&t, &p(e.mu0)).unwrap();
        assert!((ll - e.ll).abs() < 1e-10);
        assert!(g.d_mu0.abs() < 1e-8);
        for d in [-0.1, 0.1] {
            assert!(log_marginal_likelihood(&t, &p(e.mu0 + d)).unwrap() < ll);
        }
        let fixed = FixedKernelLikelihood::new(t.points(), &p(0.0)).unwrap();
        let (ll2, mu2) = fixed.evaluate(t.values());
        assert!((ll2 - ll).abs() < 1e-10 && (mu2 - e.mu0).abs() < 1e-12);
    }
}
