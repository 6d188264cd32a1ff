//! Expected-improvement Bayesian optimization over a box.

use std::f64::consts::PI;

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::gp::{self, FitOptions, GpModel, KernelParams, TrainingSet};
use crate::optim::{nelder_mead_box, NelderMeadOptions};
use crate::sampling::{BoxDomain, SobolSequence};

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `E[max(0, f_min − f)]` for `f ~ N(mean, var)`.
pub fn expected_improvement_from(mean: f64, var: f64, f_min: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    let d = f_min - mean;
    if sd == 0.0 {
        return d.max(0.0);
    }
    let z = d / sd;
    (d * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

/// Natural log of [`expected_improvement_from`], accurate deep in the
/// lower tail where the direct form underflows.
pub fn log_expected_improvement_from(mean: f64, var: f64, f_min: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    let d = f_min - mean;
    if sd == 0.0 {
        return if d > 0.0 { d.ln() } else { f64::NEG_INFINITY };
    }
    let z = d / sd;
    if z > -10.0 {
        return expected_improvement_from(mean, var, f_min).ln();
    }
    // z·Φ(z) + φ(z) = φ(z)·(1/z² − 3/z⁴ + 15/z⁶ − 105/z⁸ + …)
    let r = 1.0 / (z * z);
    let series = r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    sd.ln() - 0.5 * z * z - 0.5 * (2.0 * PI).ln() + series.ln()
}

pub fn expected_improvement(model: &GpModel, p: &[f64], f_min: f64) -> Result<f64> {
    let (mean, var) = model.predict(p)?;
    Ok(expected_improvement_from(mean, var, f_min))
}

/// Outcome of one black-box call.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// Auxiliary outputs recorded alongside the value.
    pub extras: Vec<f64>,
}

impl Evaluation {
    pub fn value(value: f64) -> Self {
        Self { value, extras: Vec::new() }
    }
}

/// One entry of the optimization history. `value` is `None` for a failed
/// evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub value: Option<f64>,
    pub extras: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BoOptions {
    /// Total number of evaluator calls.
    pub budget: usize,
    /// Sobol points evaluated before the first proposal.
    pub init_count: usize,
    /// Shifts the Sobol index range of the initial design.
    pub seed: u64,
    /// Hyperparameters are refit after this many new observations.
    pub refit_every: usize,
    /// Sobol candidates scored per proposal.
    pub acquisition_starts: usize,
    /// Best candidates refined by local search.
    pub local_searches: usize,
    pub local_evaluations: usize,
    pub noise_sq: f64,
    pub fit: FitOptions,
}

impl Default for BoOptions {
    fn default() -> Self {
        Self {
            budget: 300,
            init_count: 32,
            seed: 0,
            refit_every: 10,
            acquisition_starts: 64,
            local_searches: 8,
            local_evaluations: 150,
            noise_sq: 0.0,
            fit: FitOptions::default(),
        }
    }
}

/// Optimizer state: history, surrogate and incumbent.
#[derive(Clone, Debug)]
pub struct BoState {
    domain: BoxDomain,
    opts: BoOptions,
    history: Vec<Observation>,
    surrogate: Option<GpModel>,
    params: Option<KernelParams>,
    fitted_at: usize,
    proposals: u64,
    best: Option<usize>,
    trace: Vec<f64>,
}

fn degenerate(domain: &BoxDomain) -> bool {
    (0..domain.dim()).all(|i| domain.width(i) <= f64::EPSILON * (1.0 + domain.lower[i].abs().max(domain.upper[i].abs())))
}

impl BoState {
    pub fn new(domain: BoxDomain, opts: BoOptions) -> Result<Self> {
        if opts.init_count == 0 || opts.acquisition_starts == 0 {
            return Err(invalid("init_count and acquisition_starts must be positive"));
        }
        if opts.refit_every == 0 {
            return Err(invalid("refit_every must be positive"));
        }
        SobolSequence::new(domain.dim())?;
        Ok(Self {
            domain,
            opts,
            history: Vec::new(),
            surrogate: None,
            params: None,
            fitted_at: 0,
            proposals: 0,
            best: None,
            trace: Vec::new(),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn options(&self) -> &BoOptions {
        &self.opts
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn surrogate(&self) -> Option<&GpModel> {
        self.surrogate.as_ref()
    }

    /// Best successful observation.
    pub fn best(&self) -> Option<&Observation> {
        self.best.map(|i| &self.history[i])
    }

    pub fn f_min(&self) -> f64 {
        self.best().and_then(|o| o.value).unwrap_or(f64::INFINITY)
    }

    /// Best value after each observation (`+∞` until the first success).
    pub fn best_trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn remaining(&self) -> usize {
        self.opts.budget.saturating_sub(self.history.len())
    }

    fn initial_start(&self) -> u64 {
        1 + (self.opts.seed % 4096) * self.opts.init_count.next_power_of_two() as u64
    }

    /// The `i`-th point of the initial design.
    pub fn initial_point(&self, i: usize) -> Vec<f64> {
        let seq = SobolSequence::new(self.domain.dim()).expect("dimension checked");
        self.domain.scale_unit(&seq.point(self.initial_start() + i as u64))
    }

    /// Point to evaluate next.
    pub fn next_point(&mut self) -> Result<Vec<f64>> {
        if self.history.len() < self.opts.init_count {
            return Ok(self.initial_point(self.history.len()));
        }
        if self.surrogate.is_some() {
            return self.propose();
        }
        // Every initial evaluation failed: continue the space-filling design.
        for k in 0.. {
            let p = self.initial_point(self.history.len() + k);
            if !self.is_known(&p) {
                return Ok(p);
            }
        }
        unreachable!()
    }

    fn is_known(&self, p: &[f64]) -> bool {
        let widths: Vec<f64> = (0..self.domain.dim()).map(|i| self.domain.width(i)).collect();
        self.history.iter().any(|o| {
            o.point
                .iter()
                .zip(p)
                .zip(&widths)
                .all(|((a, b), w)| (a - b).abs() <= 1e-9 * w.max(f64::MIN_POSITIVE))
        })
    }

    /// Approximate EI maximizer. Deterministic given the state.
    pub fn propose(&mut self) -> Result<Vec<f64>> {
        if degenerate(&self.domain) {
            log::warn!("optimization domain has zero width; returning its center");
            return Ok(self.domain.center());
        }
        let model = self.surrogate.as_ref().ok_or_else(|| Error::State("surrogate is not trained".into()))?;
        let f_min = self.f_min();
        let dim = self.domain.dim();
        let seq = SobolSequence::new(dim)?;
        let n = self.opts.acquisition_starts as u64;
        let first = 1 + self.proposals * n;
        self.proposals += 1;

        let acquisition = |p: &[f64]| -> f64 {
            match model.predict(p) {
                Ok((m, v)) => -log_expected_improvement_from(m, v, f_min),
                Err(_) => f64::INFINITY,
            }
        };
        let mut starts: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|i| {
                let p = self.domain.scale_unit(&seq.point(first + i));
                (acquisition(&p), p)
            })
            .collect();
        if let Some(b) = self.best() {
            starts.push((acquisition(&b.point), b.point.clone()));
        }
        starts.sort_by(|a, b| a.0.total_cmp(&b.0));

        let nm = NelderMeadOptions {
            max_evaluations: self.opts.local_evaluations,
            initial_step: 0.05,
            value_tolerance: 1e-10,
            size_tolerance: 1e-7,
        };
        let mut results: Vec<(f64, Vec<f64>)> = starts
            .iter()
            .take(self.opts.local_searches.max(1))
            .map(|(_, x0)| {
                let m = nelder_mead_box(acquisition, x0, &self.domain.lower, &self.domain.upper, nm);
                (m.value, m.x)
            })
            .collect();
        results.extend(starts);
        results.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, p) in &results {
            if !self.is_known(p) {
                return Ok(p.clone());
            }
        }
        let fallback = (0..).map(|k| self.domain.scale_unit(&seq.point(first + n + k))).find(|p| !self.is_known(p));
        Ok(fallback.expect("unbounded search"))
    }

    /// Records an evaluation and updates the surrogate.
    pub fn observe(&mut self, point: Vec<f64>, outcome: std::result::Result<Evaluation, String>) -> Result<()> {
        if point.len() != self.domain.dim() || !self.domain.contains(&point) {
            return Err(invalid("observed point lies outside the optimization domain"));
        }
        if self.is_known(&point) {
            return Err(invalid("point has already been evaluated"));
        }
        let obs = match outcome {
            Ok(e) if e.value.is_finite() => Observation { point, value: Some(e.value), extras: e.extras },
            Ok(e) => {
                log::warn!("evaluation returned non-finite value {}; point blacklisted", e.value);
                Observation { point, value: None, extras: e.extras }
            }
            Err(msg) => {
                log::warn!("evaluation failed: {msg}; point blacklisted");
                Observation { point, value: None, extras: Vec::new() }
            }
        };
        if let Some(v) = obs.value {
            if v < self.f_min() {
                self.best = Some(self.history.len());
            }
        }
        self.history.push(obs);
        self.trace.push(self.f_min());
        if self.history.len() >= self.opts.init_count {
            self.update_surrogate()?;
        }
        Ok(())
    }

    fn update_surrogate(&mut self) -> Result<()> {
        let (points, values): (Vec<Vec<f64>>, Vec<f64>) = self
            .history
            .iter()
            .filter_map(|o| o.value.map(|v| (o.point.clone(), v)))
            .unzip();
        if points.is_empty() {
            return Ok(());
        }
        let count = points.len();
        let training = TrainingSet::new(points, values)?;
        let refit = self.params.is_none() || count >= self.fitted_at + self.opts.refit_every;
        if !refit {
            if let Some(params) = &self.params {
                if let Ok(m) = GpModel::new(training.clone(), params.clone()) {
                    self.surrogate = Some(m);
                    return Ok(());
                }
            }
        }
        let opts = FitOptions { noise_sq: self.opts.noise_sq, warm_start: self.params.clone(), ..self.opts.fit.clone() };
        let model = gp::fit_with(training, &opts)?;
        self.params = Some(model.params().clone());
        self.fitted_at = count;
        self.surrogate = Some(model);
        Ok(())
    }

    /// Evaluates until the budget is spent. `on_observation` sees every new
    /// history entry together with the current best value.
    pub fn run<E, C>(&mut self, mut evaluator: E, mut on_observation: C) -> Result<()>
    where
        E: FnMut(&[f64]) -> std::result::Result<Evaluation, String>,
        C: FnMut(usize, &Observation, f64) -> Result<()>,
    {
        while self.remaining() > 0 {
            let p = self.next_point()?;
            let outcome = evaluator(&p);
            self.observe(p, outcome)?;
            let i = self.history.len() - 1;
            on_observation(i, &self.history[i], self.f_min())?;
        }
        Ok(())
    }
}

/// Runs a full optimization from scratch.
pub fn optimize<E>(evaluator: E, domain: &BoxDomain, opts: &BoOptions) -> Result<BoState>
where
    E: FnMut(&[f64]) -> std::result::Result<Evaluation, String>,
{
    if opts.init_count < domain.dim() + 1 {
        return Err(invalid(format!("init_count must be at least dim + 1 = {}", domain.dim() + 1)));
    }
    if opts.budget <= opts.init_count {
        return Err(invalid("budget must exceed init_count"));
    }
    let mut state = BoState::new(domain.clone(), opts.clone())?;
    state.run(evaluator, |_, _, _| Ok(()))?;
    Ok(state)
}

/// Rebuilds a state from a recorded history. The surrogate schedule is
/// replayed, so continuing yields the same proposals as an uninterrupted run.
pub fn resume(domain: &BoxDomain, opts: &BoOptions, history: Vec<Observation>) -> Result<BoState> {
    let mut state = BoState::new(domain.clone(), opts.clone())?;
    for (i, o) in history.into_iter().enumerate() {
        if i >= state.opts.init_count {
            // Keep the acquisition stream aligned with the original run.
            state.proposals += 1;
        }
        let outcome = match o.value {
            Some(v) => Ok(Evaluation { value: v, extras: o.extras }),
            None => Err("recorded failure".to_string()),
        };
        state.observe(o.point, outcome)?;
    }
    Ok(state)
}
