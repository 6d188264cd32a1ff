//! Monte Carlo propagation of fabrication tolerances through surrogate
//! models, robust optimization of the distribution mean, and verification
//! against the true oracle.

use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayesopt::{optimize, BoOptions, Evaluation};
use crate::design::{DesignPoint, DESIGN_DIM, PARAMETER_NAMES};
use crate::error::{invalid, Error, Result};
use crate::gp::{fit_with, GpModel, TrainingSet};
use crate::objective::{target, ModeResult, ObjectiveSpec};
use crate::sampling::{
    default_mean_bounds_sigma, default_training_scales, mvn_sample, sobol, training_domain, BoxDomain, ToleranceSpec,
};
use crate::stats::{bootstrap_median_se, percentile_sorted, sorted, Histogram};
use crate::warp::{fit_warped_with, WarpFitOptions, WarpedGpModel};

/// Oracle failures tolerated during training before giving up.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const DEFAULT_ANALYSIS_SAMPLES: usize = 50_000;
pub const DEFAULT_ROBUST_SAMPLES: usize = 5000;
pub const DEFAULT_VERIFY_COUNT: usize = 512;
const HISTOGRAM_BINS: usize = 60;
/// Half-width, in standard deviations, that must stay inside the trained box.
const COVERAGE_SIGMAS: f64 = 3.0;

/// The three output quantities in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    LambdaC,
    Fp,
    EtaSmf,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::LambdaC, Quantity::Fp, Quantity::EtaSmf];

    pub fn key(self) -> &'static str {
        match self {
            Quantity::LambdaC => "lambda_c",
            Quantity::Fp => "fp",
            Quantity::EtaSmf => "eta_smf",
        }
    }

    fn of(self, m: &ModeResult) -> f64 {
        match self {
            Quantity::LambdaC => m.lambda_c,
            Quantity::Fp => m.fp,
            Quantity::EtaSmf => m.eta_smf,
        }
    }
}

/// Surrogates of resonance wavelength, Purcell factor and fiber efficiency
/// trained on one shared point set.
#[derive(Clone, Debug)]
pub struct SurrogateBundle {
    pub lambda_model: GpModel,
    /// Warped with lower bound 0.
    pub fp_model: WarpedGpModel,
    /// Warped with bounds 0 and 1.
    pub eta_model: WarpedGpModel,
    pub domain: BoxDomain,
}

/// Per-point surrogate output: central value and 1σ spread on the output
/// scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointPrediction {
    pub median: f64,
    pub p16: f64,
    pub p84: f64,
}

impl PointPrediction {
    pub fn spread(&self) -> f64 {
        0.5 * (self.p84 - self.p16)
    }
}

impl SurrogateBundle {
    pub fn new(lambda_model: GpModel, fp_model: WarpedGpModel, eta_model: WarpedGpModel, domain: BoxDomain) -> Result<Self> {
        let d = domain.dim();
        if lambda_model.dim() != d || fp_model.dim() != d || eta_model.dim() != d {
            return Err(invalid("surrogate dimensions do not match the domain"));
        }
        if lambda_model.training().points() != fp_model.gp().training().points()
            || lambda_model.training().points() != eta_model.gp().training().points()
        {
            return Err(invalid("surrogates were trained on different point sets"));
        }
        Ok(Self { lambda_model, fp_model, eta_model, domain })
    }

    pub fn training_count(&self) -> usize {
        self.lambda_model.training().count()
    }

    /// Central predictions of all three quantities.
    pub fn predict_medians(&self, points: &[Vec<f64>]) -> Result<Vec<ModeResult>> {
        let lambda = self.lambda_model.predict_mean_batch(points)?;
        let fp = self.fp_model.predict_median_batch(points)?;
        let eta = self.eta_model.predict_median_batch(points)?;
        Ok((0..points.len()).map(|i| ModeResult::new(lambda[i], fp[i], eta[i])).collect())
    }

    /// Predictions with their 16/84 % bands for one quantity.
    pub fn predict(&self, q: Quantity, points: &[Vec<f64>]) -> Result<Vec<PointPrediction>> {
        Ok(match q {
            Quantity::LambdaC => self
                .lambda_model
                .predict_batch(points)?
                .into_iter()
                .map(|(m, v)| {
                    let s = v.sqrt();
                    PointPrediction { median: m, p16: m - s, p84: m + s }
                })
                .collect(),
            Quantity::Fp | Quantity::EtaSmf => {
                let model = if q == Quantity::Fp { &self.fp_model } else { &self.eta_model };
                model
                    .predict_bounded_batch(points)?
                    .into_iter()
                    .map(|b| PointPrediction { median: b.median, p16: b.p16, p84: b.p84 })
                    .collect()
            }
        })
    }

    /// Fails with the offending parameters when `mean ± 3σ` leaves the
    /// trained box.
    pub fn check_coverage(&self, mean: &DesignPoint, tol: &ToleranceSpec) -> Result<()> {
        check_inside(&self.domain, mean, tol, &[0.0; DESIGN_DIM])
    }
}

/// Requires `center ± (extra_sigma + 3)·Δ` inside `domain`.
pub fn check_inside(domain: &BoxDomain, center: &DesignPoint, tol: &ToleranceSpec, extra_sigma: &[f64; DESIGN_DIM]) -> Result<()> {
    let half: Vec<f64> = (0..DESIGN_DIM).map(|i| (extra_sigma[i] + COVERAGE_SIGMAS) * tol.sigma[i]).collect();
    check_box(domain, &center.to_array(), &half)
}

/// Requires `center ± half` inside `domain` in every coordinate.
fn check_box(domain: &BoxDomain, center: &[f64], half: &[f64]) -> Result<()> {
    let parameters: Vec<String> = (0..center.len())
        .filter(|&i| center[i] - half[i] < domain.lower[i] || center[i] + half[i] > domain.upper[i])
        .map(|i| domain.names.get(i).cloned().unwrap_or_else(|| PARAMETER_NAMES[i].to_string()))
        .collect();
    if parameters.is_empty() {
        Ok(())
    } else {
        Err(Error::Extrapolation { parameters })
    }
}

/// Surrogate training settings.
#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub warp: WarpFitOptions,
}

/// Trains a bundle on `count` Sobol points over the default training box
/// around `center`.
pub fn train_bundle<F>(oracle: F, center: &DesignPoint, tol: &ToleranceSpec, count: usize, seed: u64) -> Result<SurrogateBundle>
where
    F: Fn(&DesignPoint) -> std::result::Result<ModeResult, String> + Sync,
{
    let domain = training_domain(center, tol, &default_training_scales())?;
    train_bundle_on(oracle, &domain, count, seed, &TrainOptions::default())
}

/// Trains a bundle on `count` Sobol points over an explicit box. The Sobol
/// index range is shifted by `seed` so that distinct seeds give disjoint
/// point sets.
pub fn train_bundle_on<F>(oracle: F, domain: &BoxDomain, count: usize, seed: u64, opts: &TrainOptions) -> Result<SurrogateBundle>
where
    F: Fn(&DesignPoint) -> std::result::Result<ModeResult, String> + Sync,
{
    if count < 64 || !count.is_power_of_two() {
        return Err(invalid(format!("training count must be a power of two of at least 64, got {count}")));
    }
    if domain.dim() != DESIGN_DIM {
        return Err(invalid("training domain must span the seven design parameters"));
    }
    let points = if seed == 0 {
        sobol(DESIGN_DIM, count, domain)?
    } else {
        crate::sampling::sobol_from(DESIGN_DIM, count, domain, 1 + (seed % 4096) * count as u64)?
    };
    let outcomes: Vec<std::result::Result<ModeResult, String>> = points
        .par_iter()
        .map(|p| {
            let dp = DesignPoint::from_slice(p).expect("seven coordinates");
            match oracle(&dp) {
                Ok(m) if [m.lambda_c, m.fp, m.eta_smf].iter().all(|v| v.is_finite()) => Ok(m),
                Ok(m) => Err(format!("non-finite output {m:?}")),
                Err(e) => Err(e),
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * count as f64 {
        let first = outcomes.iter().find_map(|o| o.as_ref().err()).cloned().unwrap_or_default();
        return Err(Error::Training(format!("{failures} of {count} oracle evaluations failed; first: {first}")));
    }
    if failures > 0 {
        warn!("dropping {failures} of {count} training points with failed oracle evaluations");
    }
    let (kept, modes): (Vec<Vec<f64>>, Vec<ModeResult>) =
        points.into_iter().zip(outcomes).filter_map(|(p, o)| o.ok().map(|m| (p, m))).unzip();
    fit_bundle(kept, &modes, domain, opts)
}

/// Fits the three surrogates to precomputed oracle outputs.
pub fn fit_bundle(points: Vec<Vec<f64>>, modes: &[ModeResult], domain: &BoxDomain, opts: &TrainOptions) -> Result<SurrogateBundle> {
    let set = |q: Quantity| TrainingSet::new(points.clone(), modes.iter().map(|m| q.of(m)).collect());

    let lambda_model = fit_with(set(Quantity::LambdaC)?, &opts.warp.gp)?;
    let fp_model = fit_warped_with(set(Quantity::Fp)?, 0.0, f64::INFINITY, &opts.warp)?;
    let eta_model = fit_warped_with(set(Quantity::EtaSmf)?, 0.0, 1.0, &opts.warp)?;
    SurrogateBundle::new(lambda_model, fp_model, eta_model, domain.clone())
}

/// Distribution summary of one quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityStats {
    pub median: f64,
    /// Uncertainty of the median: Monte Carlo and surrogate errors in
    /// quadrature.
    pub sigma_median: f64,
    /// `P84 − P50`.
    pub sigma_plus: f64,
    /// `P50 − P16`.
    pub sigma_minus: f64,
    pub p16: f64,
    pub p84: f64,
    /// Bootstrap standard error of the median.
    pub mc_error: f64,
    /// Median of the per-sample predictive spreads.
    pub surrogate_spread: f64,
    pub sample_count: usize,
    #[serde(skip)]
    pub histogram: Histogram,
}

impl QuantityStats {
    /// Summarizes `values` whose per-sample predictive spreads are `spreads`.
    pub fn from_samples(values: &[f64], spreads: &[f64], seed: u64) -> Result<Self> {
        let s = sorted(values)?;
        let (p16, median, p84) = (percentile_sorted(&s, 0.16), percentile_sorted(&s, 0.5), percentile_sorted(&s, 0.84));
        let mc_error = bootstrap_median_se(values, BOOTSTRAP_RESAMPLES, seed)?;
        let surrogate_spread = if spreads.is_empty() { 0.0 } else { crate::stats::median(spreads)? };
        Ok(Self {
            median,
            sigma_median: mc_error.hypot(surrogate_spread),
            sigma_plus: p84 - median,
            sigma_minus: median - p16,
            p16,
            p84,
            mc_error,
            surrogate_spread,
            sample_count: values.len(),
            histogram: Histogram::new(values, HISTOGRAM_BINS, s[0], s[s.len() - 1])?,
        })
    }

    /// `(P50 ± σ_Median)_{−σ⁻}^{+σ⁺}` with every number multiplied by `scale`.
    pub fn format_triple(&self, scale: f64, decimals: usize) -> String {
        format!(
            "({:.d$} ± {:.d$})_{{-{:.d$}}}^{{+{:.d$}}}",
            self.median * scale,
            self.sigma_median * scale,
            self.sigma_minus * scale,
            self.sigma_plus * scale,
            d = decimals
        )
    }

    /// Histogram rows `bin_lo,bin_hi,count,density` preceded by the
    /// percentile markers as comment lines.
    pub fn write_histogram_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# p16={:.12e} p50={:.12e} p84={:.12e}", self.p16, self.median, self.p84)?;
        writeln!(out, "bin_lo,bin_hi,count,density")?;
        for ((e, c), d) in self.histogram.edges.windows(2).zip(&self.histogram.counts).zip(self.histogram.density()) {
            writeln!(out, "{:.12e},{:.12e},{c},{d:.12e}", e[0], e[1])?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub mean: DesignPoint,
    pub tolerances: ToleranceSpec,
    #[serde(rename = "analysis_seed")]
    pub seed: u64,
    pub lambda_c: QuantityStats,
    pub fp: QuantityStats,
    pub eta_smf: QuantityStats,
}

impl RobustnessReport {
    pub fn get(&self, q: Quantity) -> &QuantityStats {
        match q {
            Quantity::LambdaC => &self.lambda_c,
            Quantity::Fp => &self.fp,
            Quantity::EtaSmf => &self.eta_smf,
        }
    }
}

impl fmt::Display for RobustnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda_C = {} nm", self.lambda_c.format_triple(1.0, 2))?;
        writeln!(f, "F_P      = {}", self.fp.format_triple(1.0, 1))?;
        write!(f, "eta_SMF  = {} %", self.eta_smf.format_triple(100.0, 1))
    }
}

/// Monte Carlo robustness analysis of the design distribution
/// `N(mean, diag(Δ²))` on the surrogates.
pub fn analyze(bundle: &SurrogateBundle, mean: &DesignPoint, tol: &ToleranceSpec, n_samples: usize, seed: u64) -> Result<RobustnessReport> {
    bundle.check_coverage(mean, tol)?;
    let points: Vec<Vec<f64>> =
        mvn_sample(mean, tol, n_samples, seed)?.iter().map(|p| p.to_array().to_vec()).collect();
    let stats = |q: Quantity, k: u64| -> Result<QuantityStats> {
        let preds = bundle.predict(q, &points)?;
        let values: Vec<f64> = preds.iter().map(|p| p.median).collect();
        let spreads: Vec<f64> = preds.iter().map(|p| p.spread()).collect();
        QuantityStats::from_samples(&values, &spreads, seed.wrapping_add(k))
    };
    Ok(RobustnessReport {
        mean: *mean,
        tolerances: *tol,
        seed,
        lambda_c: stats(Quantity::LambdaC, 1)?,
        fp: stats(Quantity::Fp, 2)?,
        eta_smf: stats(Quantity::EtaSmf, 3)?,
    })
}

/// Medians of the three quantities over the design distribution, using the
/// surrogates' central predictions.
pub fn median_performance(bundle: &SurrogateBundle, mean: &DesignPoint, tol: &ToleranceSpec, n_samples: usize, seed: u64) -> Result<ModeResult> {
    let points: Vec<Vec<f64>> =
        mvn_sample(mean, tol, n_samples, seed)?.iter().map(|p| p.to_array().to_vec()).collect();
    let preds = bundle.predict_medians(&points)?;
    let med = |q: Quantity| crate::stats::median(&preds.iter().map(|m| q.of(m)).collect::<Vec<_>>());
    Ok(ModeResult::new(med(Quantity::LambdaC)?, med(Quantity::Fp)?, med(Quantity::EtaSmf)?))
}

/// Settings for [`robust_optimize`].
#[derive(Clone, Debug)]
pub struct RobustOptions {
    /// Half-widths of the search box for the mean, in standard deviations.
    pub mu_bounds_sigma: [f64; DESIGN_DIM],
    pub n_samples: usize,
    pub bo: BoOptions,
    /// Sample stream shared by all evaluations.
    pub seed: u64,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            mu_bounds_sigma: default_mean_bounds_sigma(),
            n_samples: DEFAULT_ROBUST_SAMPLES,
            bo: BoOptions { budget: 100, ..BoOptions::default() },
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustOptimum {
    pub mean: DesignPoint,
    /// Target of the medians at `mean`.
    pub value: f64,
    pub median_performance: ModeResult,
    /// Surrogate prediction at `mean` itself.
    pub point_performance: ModeResult,
    pub evaluations: usize,
}

/// Search box for the distribution mean around `center`.
pub fn mean_domain(center: &DesignPoint, tol: &ToleranceSpec, bounds_sigma: &[f64; DESIGN_DIM]) -> Result<BoxDomain> {
    training_domain(center, tol, bounds_sigma)
}

/// Minimizes the target of the median performance over the distribution
/// mean. Every evaluation uses the same `n_samples` standard-normal draws.
pub fn robust_optimize(
    bundle: &SurrogateBundle,
    center: &DesignPoint,
    tol: &ToleranceSpec,
    objective: &ObjectiveSpec,
    opts: &RobustOptions,
) -> Result<RobustOptimum> {
    objective.validate()?;
    if opts.n_samples == 0 {
        return Err(invalid("robust optimization needs at least one sample per evaluation"));
    }
    let domain = mean_domain(center, tol, &opts.mu_bounds_sigma)?;
    check_inside(&bundle.domain, center, tol, &opts.mu_bounds_sigma)?;

    let evaluate = |mu: &[f64]| -> std::result::Result<Evaluation, String> {
        let mean = DesignPoint::from_slice(mu).map_err(|e| e.to_string())?;
        let perf = median_performance(bundle, &mean, tol, opts.n_samples, opts.seed).map_err(|e| e.to_string())?;
        let value = target(&perf, objective).map_err(|e| e.to_string())?;
        Ok(Evaluation { value, extras: vec![perf.lambda_c, perf.fp, perf.eta_smf] })
    };
    let state = optimize(evaluate, &domain, &opts.bo)?;
    let best = state.best().ok_or_else(|| Error::State("no successful evaluation".into()))?;
    let mean = DesignPoint::from_slice(&best.point)?;
    let point = bundle.predict_medians(&[best.point.clone()])?[0];
    Ok(RobustOptimum {
        mean,
        value: best.value.expect("incumbent has a value"),
        median_performance: ModeResult::new(best.extras[0], best.extras[1], best.extras[2]),
        point_performance: point,
        evaluations: state.history().len(),
    })
}

/// Oracle-versus-surrogate comparison of one quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantityCheck {
    pub oracle_median: f64,
    pub surrogate_median: f64,
    /// `|oracle_median − surrogate_median|`.
    pub median_discrepancy: f64,
    /// Fraction of oracle values inside the per-point 16–84 % band.
    pub band_coverage: f64,
    pub rms_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationSummary {
    pub requested: usize,
    pub evaluated: usize,
    pub lambda_c: QuantityCheck,
    pub fp: QuantityCheck,
    pub eta_smf: QuantityCheck,
}

impl VerificationSummary {
    pub fn get(&self, q: Quantity) -> &QuantityCheck {
        match q {
            Quantity::LambdaC => &self.lambda_c,
            Quantity::Fp => &self.fp,
            Quantity::EtaSmf => &self.eta_smf,
        }
    }
}

/// Evaluates the oracle on `count` draws from the design distribution and
/// compares with the surrogates. Failed evaluations are dropped.
pub fn verify<F>(bundle: &SurrogateBundle, oracle: F, mean: &DesignPoint, tol: &ToleranceSpec, count: usize, seed: u64) -> Result<VerificationSummary>
where
    F: Fn(&DesignPoint) -> std::result::Result<ModeResult, String> + Sync,
{
    bundle.check_coverage(mean, tol)?;
    let samples = mvn_sample(mean, tol, count, seed)?;
    let results: Vec<Option<ModeResult>> = samples
        .par_iter()
        .map(|p| oracle(p).ok().filter(|m| [m.lambda_c, m.fp, m.eta_smf].iter().all(|v| v.is_finite())))
        .collect();
    let (points, truth): (Vec<Vec<f64>>, Vec<ModeResult>) = samples
        .iter()
        .zip(results)
        .filter_map(|(p, m)| m.map(|m| (p.to_array().to_vec(), m)))
        .unzip();
    if truth.is_empty() {
        return Err(Error::Training("every verification evaluation failed".into()));
    }
    if truth.len() < count {
        warn!("dropped {} failed verification evaluations", count - truth.len());
    }
    let check = |q: Quantity| -> Result<QuantityCheck> {
        let preds = bundle.predict(q, &points)?;
        let actual: Vec<f64> = truth.iter().map(|m| q.of(m)).collect();
        let predicted: Vec<f64> = preds.iter().map(|p| p.median).collect();
        let inside = preds.iter().zip(&actual).filter(|(p, a)| **a >= p.p16 && **a <= p.p84).count();
        let rms = (predicted.iter().zip(&actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / actual.len() as f64).sqrt();
        let oracle_median = crate::stats::median(&actual)?;
        let surrogate_median = crate::stats::median(&predicted)?;
        Ok(QuantityCheck {
            oracle_median,
            surrogate_median,
            median_discrepancy: (oracle_median - surrogate_median).abs(),
            band_coverage: inside as f64 / actual.len() as f64,
            rms_error: rms,
        })
    };
    Ok(VerificationSummary {
        requested: count,
        evaluated: truth.len(),
        lambda_c: check(Quantity::LambdaC)?,
        fp: check(Quantity::Fp)?,
        eta_smf: check(Quantity::EtaSmf)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::presets;
    use crate::device::{toy_cavity, ToyConfig};

    fn toy(p: &DesignPoint) -> std::result::Result<ModeResult, String> {
        Ok(toy_cavity(p, &ToyConfig::default()).mode())
    }

    fn constant(_: &DesignPoint) -> std::result::Result<ModeResult, String> {
        Ok(ModeResult::new(930.0, 15.0, 0.6))
    }

    #[test]
    fn constant_oracle_gives_degenerate_report() {
        let tol = ToleranceSpec::fabrication_default();
        let b = train_bundle(constant, &presets::NIR_I, &tol, 64, 0).unwrap();
        let r = analyze(&b, &presets::NIR_I, &tol, 2000, 5).unwrap();
        for (q, c) in Quantity::ALL.iter().zip([930.0, 15.0, 0.6]) {
            let s = r.get(*q);
            assert!((s.median - c).abs() < 1e-6 * c, "{q:?} {}", s.median);
            assert!(s.sigma_plus < 1e-6 && s.sigma_minus < 1e-6 && s.sigma_median < 1e-3, "{q:?} {s:?}");
        }
    }

    #[test]
    fn coverage_is_checked() {
        let tol = ToleranceSpec::fabrication_default();
        let b = train_bundle(constant, &presets::NIR_I, &tol, 64, 0).unwrap();
        let shifted = DesignPoint { r: presets::NIR_I.r + 30.0, ..presets::NIR_I };
        match analyze(&b, &shifted, &tol, 100, 0) {
            Err(Error::Extrapolation { parameters }) => assert_eq!(parameters, vec!["R".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_many_failures_abort_training() {
        let tol = ToleranceSpec::fabrication_default();
        let flaky = |p: &DesignPoint| if p.r > presets::NIR_I.r + 30.0 { Err("x".to_string()) } else { constant(p) };
        assert!(matches!(train_bundle(flaky, &presets::NIR_I, &tol, 64, 0), Err(Error::Training(_))));
        assert!(train_bundle(constant, &presets::NIR_I, &tol, 48, 0).is_err());
    }

    #[test]
    fn triple_format() {
        let s = QuantityStats {
            median: 0.59,
            sigma_median: 0.05,
            sigma_plus: 0.243,
            sigma_minus: 0.429,
            p16: 0.161,
            p84: 0.833,
            mc_error: 0.0,
            surrogate_spread: 0.05,
            sample_count: 1,
            histogram: Histogram::new(&[0.5], 1, 0.0, 1.0).unwrap(),
        };
        assert_eq!(s.format_triple(100.0, 1), "(59.0 ± 5.0)_{-42.9}^{+24.3}");
    }

    #[test]
    fn toy_surrogate_is_accurate_and_bounded() {
        let tol = ToleranceSpec::fabrication_default();
        let b = train_bundle(toy, &presets::NIR_I, &tol, 256, 0).unwrap();
        let r = analyze(&b, &presets::NIR_I, &tol, 4000, 1).unwrap();
        for q in Quantity::ALL {
            let s = r.get(q);
            assert!(s.p16 <= s.median && s.median <= s.p84);
        }
        assert!(r.eta_smf.p16 >= 0.0 && r.eta_smf.p84 <= 1.0 && r.fp.p16 >= 0.0);
        let v = verify(&b, toy, &presets::NIR_I, &tol, 128, 9).unwrap();
        assert_eq!(v.evaluated, 128);
        assert!(v.eta_smf.median_discrepancy < 0.05, "{v:?}");
    }
}
