use super::likelihood::{profile_eval, FixedKernelLikelihood};
use super::{factorize, kernel_matrix, GpModel, KernelParams, TrainingSet};
use crate::error::{invalid, Error, Result};
use crate::optim::{lbfgs_box, LbfgsOptions};
use crate::sampling::SobolSequence;

/// Settings for likelihood maximization.
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub noise_sq: f64,
    /// Sobol start points in the log-hyperparameter box.
    pub starts: usize,
    pub max_iterations: usize,
    /// Hyperparameters are searched on an evenly strided subset of at most
    /// this many points; the final model always uses every point.
    pub max_fit_points: Option<usize>,
    /// Extra start point, typically the optimum of a previous fit.
    pub warm_start: Option<KernelParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { noise_sq: 0.0, starts: 8, max_iterations: 100, max_fit_points: Some(512), warm_start: None }
    }
}

/// Fits `(μ0, σ0², l_i)` by maximizing the marginal likelihood.
pub fn fit(training: TrainingSet, noise_sq: f64) -> Result<GpModel> {
    fit_with(training, &FitOptions { noise_sq, ..FitOptions::default() })
}

/// Reference scales used for the hyperparameter boxes.
pub(crate) fn reference_scales(training: &TrainingSet) -> (f64, Vec<f64>) {
    let m = training.count() as f64;
    let mean = training.values().iter().sum::<f64>() / m;
    let var = training.values().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / m;
    let var = var.max(1e-12 * (1.0 + mean * mean));
    let widths = (0..training.dim())
        .map(|d| {
            let (lo, hi) = training
                .points()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[d]), hi.max(p[d])));
            if hi > lo { hi - lo } else { 1.0 }
        })
        .collect();
    (var, widths)
}

pub fn fit_with(training: TrainingSet, opts: &FitOptions) -> Result<GpModel> {
    if !(opts.noise_sq >= 0.0 && opts.noise_sq.is_finite()) {
        return Err(invalid(format!("noise_sq must be non-negative, got {}", opts.noise_sq)));
    }
    let dim = training.dim();
    let (var, widths) = reference_scales(&training);
    let mut lo = vec![(1e-6 * var).ln()];
    let mut hi = vec![(1e3 * var).ln()];
    for w in &widths {
        lo.push((1e-3 * w).ln());
        hi.push((1e3 * w).ln());
    }
    let mut start_lo = vec![(0.1 * var).ln()];
    let mut start_hi = vec![(10.0 * var).ln()];
    for w in &widths {
        start_lo.push((0.05 * w).ln());
        start_hi.push((2.0 * w).ln());
    }

    let fit_set = match opts.max_fit_points {
        Some(n) if n >= 2 && training.count() > n => {
            let m = training.count();
            let idx: Vec<usize> = (0..n).map(|i| i * m / n).collect();
            training.subset(&idx)
        }
        _ => training.clone(),
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = &opts.warm_start {
        w.validate()?;
        w.check_dim(dim)?;
        let mut x = vec![w.sigma0_sq.ln()];
        x.extend(w.length_scales.iter().map(|l| l.ln()));
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        starts.push(x);
    }
    let seq = SobolSequence::new(dim + 1)?;
    for i in 0..opts.starts as u64 {
        let u = seq.point(1 + i);
        starts.push((0..=dim).map(|k| start_lo[k] + u[k] * (start_hi[k] - start_lo[k])).collect());
    }
    if starts.is_empty() {
        return Err(invalid("at least one start point is required"));
    }

    let lbfgs = LbfgsOptions { max_iterations: opts.max_iterations, ..LbfgsOptions::default() };
    let scale = 1.0 / fit_set.count() as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in &starts {
        let objective = |x: &[f64]| {
            profile_eval(&fit_set, x, opts.noise_sq)
                .map(|e| (-e.ll * scale, e.grad_log.iter().map(|g| -g * scale).collect()))
        };
        let result = if fit_set.count() == 1 {
            // The length scales do not enter a one-point likelihood.
            objective(x0).map(|(v, _)| crate::optim::Minimum { x: x0.clone(), value: v, evaluations: 1 })
        } else {
            lbfgs_box(objective, x0, &lo, &hi, lbfgs)
        };
        if let Some(m) = result {
            let ll = -m.value / scale;
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, m.x));
            }
        }
    }
    let Some((_, x)) = best else {
        // Surface the conditioning diagnostics of the central start.
        let x = &starts[0];
        let p = KernelParams {
            mu0: 0.0,
            sigma0_sq: x[0].exp(),
            length_scales: x[1..].iter().map(|v| v.exp()).collect(),
            noise_sq: opts.noise_sq,
        };
        factorize(kernel_matrix(fit_set.points(), &p), opts.noise_sq)?;
        return Err(Error::Training("likelihood could not be evaluated at any start".into()));
    };

    let mut params = KernelParams {
        mu0: 0.0,
        sigma0_sq: x[0].exp(),
        length_scales: x[1..].iter().map(|v| v.exp()).collect(),
        noise_sq: opts.noise_sq,
    };
    params.mu0 = FixedKernelLikelihood::new(training.points(), &params)?.evaluate(training.values()).1;
    GpModel::new(training, params)
}
