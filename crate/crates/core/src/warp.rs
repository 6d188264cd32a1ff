//! Piecewise output warping for bounded observables.
//!
//! The inverse map `g⁻¹` is exponential towards each finite bound and affine
//! with unit slope in between:
//!
//! ```text
//! g⁻¹(y) = L + exp(a_l (y − b_l))        y < y_l
//!        = y + b_lin                      y_l ≤ y ≤ y_u
//!        = U − exp(−a_u (y − b_u))        y > y_u
//! ```
//!
//! The tail constants follow from value and slope matching at the cutoffs
//! `c_l = g⁻¹(y_l)` and `c_u = g⁻¹(y_u)`. A GP is trained on `g(ỹ)` and its
//! latent quantiles are mapped back through `g⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gp::{self, FitOptions, GpModel, KernelParams, TrainingSet};
use crate::optim::{nelder_mead_box, NelderMeadOptions};

/// Minimum number of observations for [`fit_warped`].
pub const MIN_WARP_VALUES: usize = 16;

/// One exponential tail: the bound it approaches and the cutoff where it
/// joins the affine segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub bound: f64,
    pub cutoff: f64,
}

/// Bijective transform between a bounded interval and the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    lower: Option<Tail>,
    upper: Option<Tail>,
    /// Offset `b_lin` of the affine segment.
    position: f64,
}

/// Constants of the three segments derived from the free parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpCoefficients {
    pub a_lower: f64,
    pub b_lower: f64,
    pub a_upper: f64,
    pub b_upper: f64,
    pub m_linear: f64,
    pub b_linear: f64,
}

impl WarpSpec {
    pub fn new(lower: Option<Tail>, upper: Option<Tail>, position: f64) -> Result<Self> {
        if !position.is_finite() {
            return Err(invalid("warp position must be finite"));
        }
        for t in lower.iter().chain(upper.iter()) {
            if !(t.bound.is_finite() && t.cutoff.is_finite()) {
                return Err(invalid("warp bounds and cutoffs must be finite"));
            }
        }
        if let Some(l) = lower {
            if l.cutoff <= l.bound {
                return Err(invalid(format!("lower cutoff {} must exceed lower bound {}", l.cutoff, l.bound)));
            }
        }
        if let Some(u) = upper {
            if u.cutoff >= u.bound {
                return Err(invalid(format!("upper cutoff {} must be below upper bound {}", u.cutoff, u.bound)));
            }
        }
        if let (Some(l), Some(u)) = (lower, upper) {
            if l.cutoff >= u.cutoff {
                return Err(invalid(format!("lower cutoff {} must be below upper cutoff {}", l.cutoff, u.cutoff)));
            }
        }
        Ok(Self { lower, upper, position })
    }

    /// Warp onto `(lower, upper)`.
    pub fn two_sided(lower: f64, upper: f64, lower_cutoff: f64, upper_cutoff: f64, position: f64) -> Result<Self> {
        Self::new(
            Some(Tail { bound: lower, cutoff: lower_cutoff }),
            Some(Tail { bound: upper, cutoff: upper_cutoff }),
            position,
        )
    }

    /// Warp onto `(lower, ∞)`.
    pub fn lower_bounded(lower: f64, cutoff: f64, position: f64) -> Result<Self> {
        Self::new(Some(Tail { bound: lower, cutoff }), None, position)
    }

    /// Warp onto `(−∞, upper)`.
    pub fn upper_bounded(upper: f64, cutoff: f64, position: f64) -> Result<Self> {
        Self::new(None, Some(Tail { bound: upper, cutoff }), position)
    }

    pub fn identity() -> Self {
        Self { lower: None, upper: None, position: 0.0 }
    }

    pub fn lower(&self) -> Option<Tail> {
        self.lower
    }

    pub fn upper(&self) -> Option<Tail> {
        self.upper
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower.map_or(f64::NEG_INFINITY, |t| t.bound)
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper.map_or(f64::INFINITY, |t| t.bound)
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    /// Latent coordinates where the tails join the affine segment.
    pub fn latent_cutoffs(&self) -> (f64, f64) {
        (
            self.lower.map_or(f64::NEG_INFINITY, |t| t.cutoff - self.position),
            self.upper.map_or(f64::INFINITY, |t| t.cutoff - self.position),
        )
    }

    pub fn coefficients(&self) -> WarpCoefficients {
        let (yl, yu) = self.latent_cutoffs();
        let (a_lower, b_lower) = match self.lower {
            Some(t) => {
                let s = t.cutoff - t.bound;
                (1.0 / s, yl - s * s.ln())
            }
            None => (f64::NAN, f64::NAN),
        };
        let (a_upper, b_upper) = match self.upper {
            Some(t) => {
                let s = t.bound - t.cutoff;
                (1.0 / s, yu + s * s.ln())
            }
            None => (f64::NAN, f64::NAN),
        };
        WarpCoefficients { a_lower, b_lower, a_upper, b_upper, m_linear: 1.0, b_linear: self.position }
    }

    /// `g⁻¹`: latent value to bounded value. Always strictly inside the bounds.
    pub fn inverse_transform(&self, y: f64) -> f64 {
        let (yl, yu) = self.latent_cutoffs();
        if let Some(t) = self.lower.filter(|_| y < yl) {
            let s = t.cutoff - t.bound;
            let v = t.bound + s * ((y - yl) / s).exp();
            return if v > t.bound { v } else { t.bound.next_up() };
        }
        if let Some(t) = self.upper.filter(|_| y > yu) {
            let s = t.bound - t.cutoff;
            let v = t.bound - s * (-(y - yu) / s).exp();
            return if v < t.bound { v } else { t.bound.next_down() };
        }
        y + self.position
    }

    /// Derivative of `g⁻¹` at latent `y`.
    pub fn inverse_derivative(&self, y: f64) -> f64 {
        let (yl, yu) = self.latent_cutoffs();
        if let Some(t) = self.lower.filter(|_| y < yl) {
            return ((y - yl) / (t.cutoff - t.bound)).exp();
        }
        if let Some(t) = self.upper.filter(|_| y > yu) {
            return (-(y - yu) / (t.bound - t.cutoff)).exp();
        }
        1.0
    }

    fn check_inside(&self, v: f64) -> Result<()> {
        if v > self.lower_bound() && v < self.upper_bound() && !v.is_nan() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{v} is outside the open interval ({}, {})",
                self.lower_bound(),
                self.upper_bound()
            )))
        }
    }

    /// `g`: bounded value to latent value.
    pub fn transform(&self, v: f64) -> Result<f64> {
        self.check_inside(v)?;
        let (yl, yu) = self.latent_cutoffs();
        if let Some(t) = self.lower.filter(|t| v < t.cutoff) {
            let s = t.cutoff - t.bound;
            return Ok(yl + s * ((v - t.bound) / s).ln());
        }
        if let Some(t) = self.upper.filter(|t| v > t.cutoff) {
            let s = t.bound - t.cutoff;
            return Ok(yu - s * ((t.bound - v) / s).ln());
        }
        Ok(v - self.position)
    }

    /// `ln g'(v)` for a bounded value `v`.
    pub fn log_derivative(&self, v: f64) -> Result<f64> {
        self.check_inside(v)?;
        if let Some(t) = self.lower.filter(|t| v < t.cutoff) {
            return Ok(((t.cutoff - t.bound) / (v - t.bound)).ln());
        }
        if let Some(t) = self.upper.filter(|t| v > t.cutoff) {
            return Ok(((t.bound - t.cutoff) / (t.bound - v)).ln());
        }
        Ok(0.0)
    }
}

/// Back-transformed prediction of a warped GP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundedPrediction {
    pub median: f64,
    pub p16: f64,
    pub p84: f64,
    pub latent_mean: f64,
    pub latent_variance: f64,
}

impl BoundedPrediction {
    /// Half the 16–84 percentile width on the bounded scale.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.p84 - self.p16)
    }
}

/// A GP trained on warped observations.
#[derive(Clone, Debug)]
pub struct WarpedGpModel {
    warp: WarpSpec,
    gp: GpModel,
}

impl WarpedGpModel {
    /// Wraps a GP already trained on `warp.transform` of the observations.
    pub fn new(warp: WarpSpec, gp: GpModel) -> Self {
        Self { warp, gp }
    }

    pub fn warp(&self) -> &WarpSpec {
        &self.warp
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }

    pub fn dim(&self) -> usize {
        self.gp.dim()
    }

    fn bounded(&self, mean: f64, var: f64) -> BoundedPrediction {
        let sd = var.sqrt();
        BoundedPrediction {
            median: self.warp.inverse_transform(mean),
            p16: self.warp.inverse_transform(mean - sd),
            p84: self.warp.inverse_transform(mean + sd),
            latent_mean: mean,
            latent_variance: var,
        }
    }

    pub fn predict_bounded(&self, p: &[f64]) -> Result<BoundedPrediction> {
        let (mean, var) = self.gp.predict(p)?;
        Ok(self.bounded(mean, var))
    }

    pub fn predict_bounded_batch(&self, points: &[Vec<f64>]) -> Result<Vec<BoundedPrediction>> {
        Ok(self.gp.predict_batch(points)?.into_iter().map(|(m, v)| self.bounded(m, v)).collect())
    }

    /// Back-transformed latent mean.
    pub fn predict_median(&self, p: &[f64]) -> Result<f64> {
        Ok(self.warp.inverse_transform(self.gp.predict_mean(p)?))
    }

    pub fn predict_median_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .gp
            .predict_mean_batch(points)?
            .into_iter()
            .map(|m| self.warp.inverse_transform(m))
            .collect())
    }
}

fn active_tails(spec: &WarpSpec, vmin: f64, vmax: f64) -> f64 {
    let lower = spec.lower.is_some_and(|t| vmin < t.cutoff);
    let upper = spec.upper.is_some_and(|t| vmax > t.cutoff);
    lower as u8 as f64 + upper as u8 as f64
}

/// Settings for [`fit_warped`].
#[derive(Clone, Debug)]
pub struct WarpFitOptions {
    pub gp: FitOptions,
    /// Alternations of warp search and GP refit.
    pub rounds: usize,
    pub max_evaluations: usize,
}

impl Default for WarpFitOptions {
    fn default() -> Self {
        Self { gp: FitOptions::default(), rounds: 2, max_evaluations: 120 }
    }
}

/// Fits a warp for observations in `(lower, upper)` together with the GP on
/// the warped values. Either bound may be infinite.
pub fn fit_warped(training: TrainingSet, lower: f64, upper: f64) -> Result<WarpedGpModel> {
    fit_warped_with(training, lower, upper, &WarpFitOptions::default())
}

/// Tail widths `c_l − L` and `U − c_u` in log space, with their search box.
struct WarpSearch {
    lower: Option<f64>,
    upper: Option<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl WarpSearch {
    fn spec(&self, x: &[f64]) -> Option<WarpSpec> {
        let mut k = 0;
        let mut next = || {
            let v = x[k].exp();
            k += 1;
            v
        };
        let lower = self.lower.map(|b| Tail { bound: b, cutoff: b + next() });
        let upper = self.upper.map(|b| Tail { bound: b, cutoff: b - next() });
        WarpSpec::new(lower, upper, 0.0).ok()
    }
}

pub fn fit_warped_with(training: TrainingSet, lower: f64, upper: f64, opts: &WarpFitOptions) -> Result<WarpedGpModel> {
    if lower.is_nan() || upper.is_nan() || lower >= upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(invalid(format!("invalid warp bounds ({lower}, {upper})")));
    }
    let values = training.values();
    if values.len() < MIN_WARP_VALUES {
        return Err(invalid(format!(
            "warp fitting needs at least {MIN_WARP_VALUES} values, got {}",
            values.len()
        )));
    }
    let offenders: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v > lower && **v < upper))
        .map(|(i, v)| format!("#{i}={v}"))
        .collect();
    if !offenders.is_empty() {
        let shown = offenders.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::Domain(format!(
            "{} value(s) outside ({lower}, {upper}): {shown}",
            offenders.len()
        )));
    }

    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (vmax - vmin).max(1e-12 * (1.0 + vmax.abs()));
    let span = if lower.is_finite() && upper.is_finite() {
        upper - lower
    } else if lower.is_finite() {
        vmax - lower
    } else {
        upper - vmin
    };
    let search = WarpSearch {
        lower: lower.is_finite().then_some(lower),
        upper: upper.is_finite().then_some(upper),
        lo: Vec::new(),
        hi: Vec::new(),
    };
    let n_free = search.lower.is_some() as usize + search.upper.is_some() as usize;
    if n_free == 0 {
        let gp = gp::fit_with(training, &opts.gp)?;
        return Ok(WarpedGpModel::new(WarpSpec::identity(), gp));
    }
    let min_width = (1e-6 * span).max(1e-9 * spread);
    let search = WarpSearch {
        lo: vec![min_width.ln(); n_free],
        hi: vec![span.ln(); n_free],
        ..search
    };

    // Candidate tail widths: quantiles of the distance to each bound plus a
    // width that keeps every value on the affine segment.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |q: f64| sorted[((sorted.len() - 1) as f64 * q).round() as usize];
    let lower_widths: Vec<f64> = search
        .lower
        .map(|b| {
            let mut w = vec![0.5 * (vmin - b)];
            w.extend([0.1, 0.25, 0.5].iter().map(|q| quantile(*q) - b));
            w
        })
        .unwrap_or_default();
    let upper_widths: Vec<f64> = search
        .upper
        .map(|b| {
            let mut w = vec![0.5 * (b - vmax)];
            w.extend([0.9, 0.75, 0.5].iter().map(|q| b - quantile(*q)));
            w
        })
        .unwrap_or_default();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let lw: Vec<Option<f64>> = if lower_widths.is_empty() { vec![None] } else { lower_widths.into_iter().map(Some).collect() };
    let uw: Vec<Option<f64>> = if upper_widths.is_empty() { vec![None] } else { upper_widths.into_iter().map(Some).collect() };
    for l in &lw {
        for u in &uw {
            let x: Vec<f64> = l
                .iter()
                .chain(u.iter())
                .enumerate()
                .map(|(i, w)| w.max(min_width).ln().clamp(search.lo[i], search.hi[i]))
                .collect();
            if search.spec(&x).is_some() {
                candidates.push(x);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::Training("no admissible warp cutoffs".into()));
    }

    let warped = |spec: &WarpSpec| -> Option<(Vec<f64>, f64)> {
        let mut jac = 0.0;
        let mut y = Vec::with_capacity(values.len());
        for v in values {
            y.push(spec.transform(*v).ok()?);
            jac += spec.log_derivative(*v).ok()?;
        }
        Some((y, jac))
    };

    // Each tail reaching into the data costs one parameter's BIC penalty.
    let tail_penalty = 0.5 * (values.len() as f64).ln();
    let mut x_best = candidates[0].clone();
    let mut spec = search.spec(&x_best).expect("admissible candidate");
    let mut gp_opts = opts.gp.clone();
    let mut kernel: Option<KernelParams> = None;
    for round in 0..opts.rounds.max(1) {
        let (y, _) = warped(&spec).ok_or_else(|| Error::Training("warp produced invalid values".into()))?;
        let model = gp::fit_with(training.with_values(y)?, &gp_opts)?;
        let params = model.params().clone();
        let likelihood = gp::FixedKernelLikelihood::new(training.points(), &params)?;
        let objective = |x: &[f64]| -> f64 {
            let Some(s) = search.spec(x) else { return f64::INFINITY };
            match warped(&s) {
                Some((y, jac)) => -(likelihood.evaluate(&y).0 + jac) + tail_penalty * active_tails(&s, vmin, vmax),
                None => f64::INFINITY,
            }
        };
        let start = if round == 0 {
            candidates
                .iter()
                .map(|c| (objective(c), c))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, c)| c.clone())
                .expect("non-empty")
        } else {
            x_best.clone()
        };
        let nm = NelderMeadOptions {
            max_evaluations: opts.max_evaluations,
            initial_step: 0.1,
            value_tolerance: 1e-9,
            size_tolerance: 1e-6,
        };
        let m = nelder_mead_box(objective, &start, &search.lo, &search.hi, nm);
        log::debug!("warp search round {round}: {} evaluations, objective {:.6}", m.evaluations, m.value);
        x_best = if m.value <= objective(&start) { m.x } else { start };
        spec = search.spec(&x_best).expect("optimizer stays admissible");
        gp_opts = FitOptions { warm_start: Some(params.clone()), starts: 2, ..opts.gp.clone() };
        kernel = Some(params);
        log::debug!("warp round {round}: {:?}", spec);
    }
    let (y, _) = warped(&spec).ok_or_else(|| Error::Training("warp produced invalid values".into()))?;
    gp_opts.warm_start = kernel;
    let gp = gp::fit_with(training.with_values(y)?, &gp_opts)?;
    Ok(WarpedGpModel::new(spec, gp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_warp() -> WarpSpec {
        WarpSpec::two_sided(0.0, 1.0, 0.1, 0.9, 0.0).unwrap()
    }

    #[test]
    fn midrange_is_identity_with_zero_offset() {
        assert_eq!(unit_warp().inverse_transform(0.5), 0.5);
        assert_eq!(unit_warp().transform(0.5).unwrap(), 0.5);
    }

    #[test]
    fn coefficients_match_tails() {
        let w = unit_warp();
        let c = w.coefficients();
        assert!((c.a_lower - 10.0).abs() < 1e-12 && (c.a_upper - 10.0).abs() < 1e-12);
        for y in [-3.0, -0.5, 0.05] {
            let v = (c.a_lower * (y - c.b_lower)).exp();
            assert!((w.inverse_transform(y) - v).abs() < 1e-14);
        }
        for y in [0.95, 1.5, 4.0] {
            let v = 1.0 - (-c.a_upper * (y - c.b_upper)).exp();
            assert!((w.inverse_transform(y) - v).abs() < 1e-14);
        }
    }

    #[test]
    fn matching_is_c1() {
        for w in [
            unit_warp(),
            WarpSpec::two_sided(-2.0, 5.0, -1.7, 0.3, 1.25).unwrap(),
            WarpSpec::lower_bounded(0.0, 3.0, -0.4).unwrap(),
        ] {
            let (yl, yu) = w.latent_cutoffs();
            for y in [yl, yu].into_iter().filter(|v| v.is_finite()) {
                let h = 1e-7 * (1.0 + y.abs());
                let (left, right) = (w.inverse_transform(y - h), w.inverse_transform(y + h));
                assert!((right - left - 2.0 * h).abs() < 1e-10);
                let dl = w.inverse_derivative(y.next_down());
                let dr = w.inverse_derivative(y.next_up());
                assert!((dl - dr).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn limits_approach_bounds() {
        let w = unit_warp();
        assert!(w.inverse_transform(-1e6) > 0.0 && w.inverse_transform(-1e6) < 1e-300);
        assert!(w.inverse_transform(1e6) < 1.0);
        assert!(w.inverse_transform(-50.0) < 1e-20);
        assert!(WarpSpec::identity().inverse_transform(1e300) == 1e300);
    }

    #[test]
    fn transform_rejects_bounds() {
        let w = unit_warp();
        assert!(matches!(w.transform(0.0), Err(Error::Domain(_))));
        assert!(matches!(w.transform(1.0), Err(Error::Domain(_))));
        assert!(matches!(w.transform(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn constructor_checks_ordering() {
        assert!(WarpSpec::two_sided(0.0, 1.0, 0.6, 0.4, 0.0).is_err());
        assert!(WarpSpec::two_sided(0.0, 1.0, 0.0, 0.9, 0.0).is_err());
        assert!(WarpSpec::lower_bounded(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn log_derivative_matches_finite_difference() {
        let w = WarpSpec::two_sided(0.0, 1.0, 0.2, 0.7, 0.1).unwrap();
        for v in [0.01, 0.15, 0.5, 0.8, 0.999] {
            let h = 1e-7;
            let fd = (w.transform(v + h).unwrap() - w.transform(v - h).unwrap()) / (2.0 * h);
            assert!((w.log_derivative(v).unwrap() - fd.ln()).abs() < 1e-5, "at {v}");
        }
    }

    #[test]
    fn fit_rejects_out_of_bounds_values() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let mut vals = vec![0.5; 20];
        vals[3] = 1.0;
        vals[7] = -0.1;
        let t = TrainingSet::new(pts, vals).unwrap();
        match fit_warped(t, 0.0, 1.0) {
            Err(Error::Domain(msg)) => assert!(msg.contains("#3") && msg.contains("#7"), "{msg}"),
            other => panic!("unexpected {:?}", other.map(|m| *m.warp())),
        }
    }

    #[test]
    fn fit_needs_enough_values() {
        let t = TrainingSet::new((0..8).map(|i| vec![i as f64]).collect(), vec![0.5; 8]).unwrap();
        assert!(fit_warped(t, 0.0, 1.0).is_err());
    }

    fn smooth_1d(f: impl Fn(f64) -> f64, n: usize) -> TrainingSet {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let vals = pts.iter().map(|p| f(p[0])).collect();
        TrainingSet::new(pts, vals).unwrap()
    }

    #[test]
    fn interior_data_stays_affine() {
        let t = smooth_1d(|x| 0.5 + 0.1 * (4.0 * x).sin() * 0.9, 24);
        let m = fit_warped(t.clone(), 0.0, 1.0).unwrap();
        for v in t.values() {
            assert_eq!(m.warp().log_derivative(*v).unwrap(), 0.0, "value {v} not on affine segment: {:?}", m.warp());
        }
    }

    #[test]
    fn one_sided_warp_has_no_upper_tail() {
        let t = smooth_1d(|x| 0.5 + 30.0 * (-(x - 0.4).powi(2) / 0.02).exp(), 24);
        let m = fit_warped(t, 0.0, f64::INFINITY).unwrap();
        assert!(m.warp().upper().is_none());
        assert!(m.warp().lower().is_some());
    }

    #[test]
    fn clustered_data_respects_upper_bound() {
        let t = smooth_1d(|x| 0.998 - 0.3 * x.powi(4), 32);
        let m = fit_warped(t.clone(), 0.0, 1.0).unwrap();
        let plain = gp::fit(t, 0.0).unwrap();
        let mut plain_violates = false;
        for i in 0..400 {
            let q = [-0.5 + i as f64 * 0.005];
            let b = m.predict_bounded(&q).unwrap();
            assert!(b.p84 < 1.0 && b.p16 > 0.0);
            let (mean, var) = plain.predict(&q).unwrap();
            plain_violates |= mean + var.sqrt() > 1.0;
        }
        assert!(plain_violates);
    }

    #[test]
    fn affine_warp_reduces_to_plain_gp() {
        let t = smooth_1d(|x| 0.5 + 0.09 * (4.0 * x).sin(), 24);
        let m = fit_warped(t.clone(), 0.0, 1.0).unwrap();
        let plain = gp::fit(t, 0.0).unwrap();
        for i in 0..50 {
            let q = [i as f64 / 49.0];
            let a = m.predict_bounded(&q).unwrap().median;
            let b = plain.predict(&q).unwrap().0;
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn quantiles_match_sampled_distribution() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let w = unit_warp();
        let (mean, sd) = (1.05, 0.2);
        let n = 100_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut s: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                w.inverse_transform(mean + sd * z)
            })
            .collect();
        s.sort_by(f64::total_cmp);
        for (q, latent) in [(0.158_655_253_9, mean - sd), (0.5, mean), (0.841_344_746_1, mean + sd)] {
            let empirical = s[(q * n as f64) as usize];
            // Standard error of a sample quantile: sqrt(q(1−q)/n) / density.
            let density = (-0.5 * ((latent - mean) / sd).powi(2)).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt())
                / w.inverse_derivative(latent);
            let se = (q * (1.0 - q) / n as f64).sqrt() / density;
            assert!((empirical - w.inverse_transform(latent)).abs() < 3.0 * se);
        }
    }
}
