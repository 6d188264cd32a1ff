//! Small box-constrained local optimizers used internally: a projected
//! L-BFGS for smooth objectives with gradients and a clamped Nelder–Mead for
//! derivative-free searches. Both minimize.

use std::collections::VecDeque;

/// Outcome of a local minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    pub memory: usize,
    /// Stop when the projected gradient's max-norm drops below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative decrease of one iteration drops below this.
    pub value_tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { max_iterations: 100, memory: 8, gradient_tolerance: 1e-6, value_tolerance: 1e-10 }
    }
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut norm = 0.0f64;
    for i in 0..x.len() {
        let moved = (x[i] - g[i]).clamp(lo[i], hi[i]) - x[i];
        norm = norm.max(moved.abs());
    }
    norm
}

/// Minimizes `f` over the box `[lo, hi]`. `f` returns `None` where it cannot be
/// evaluated; such points are treated as infinitely bad.
pub fn lbfgs_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: LbfgsOptions) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for _ in 0..opts.max_iterations {
        if projected_gradient_norm(&x, &g, lo, hi) < opts.gradient_tolerance {
            break;
        }
        // Two-loop recursion on the free variables.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| {
                let gmax = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if gmax > 0.0 { 1.0 / gmax } else { 1.0 }
            });
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            history.clear();
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            d = g.iter().map(|v| -v / gmax).collect();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
            project(&mut trial, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            evaluations += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * decrease.min(0.0) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else { break };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - fxn).abs() / fx.abs().max(1.0);
        x = xn;
        fx = fxn;
        g = gn;
        if rel < opts.value_tolerance {
            break;
        }
    }
    Some(Minimum { x, value: fx, evaluations })
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Initial simplex edge as a fraction of each box width.
    pub initial_step: f64,
    /// Stop when the simplex value spread falls below this (absolute).
    pub value_tolerance: f64,
    /// Stop when the simplex diameter falls below this fraction of the box.
    pub size_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evaluations: 200, initial_step: 0.05, value_tolerance: 1e-12, size_tolerance: 1e-9 }
    }
}

/// Nelder–Mead with every vertex clamped into `[lo, hi]`.
pub fn nelder_mead_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let width: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]).max(0.0)).collect();
    let mut eval = |p: &mut Vec<f64>, count: &mut usize| -> f64 {
        project(p, lo, hi);
        *count += 1;
        let v = f(p);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut count = 0;
    let mut start = x0.to_vec();
    let f0 = eval(&mut start, &mut count);
    let mut simplex = vec![(start.clone(), f0)];
    for i in 0..n {
        let mut p = start.clone();
        let h = opts.initial_step * width[i];
        // Step toward the interior when the start sits on the upper face.
        p[i] = if p[i] + h <= hi[i] { p[i] + h } else { p[i] - h };
        let v = eval(&mut p, &mut count);
        simplex.push((p, v));
    }

    while count < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        let diameter = (1..=n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let w = if width[i] > 0.0 { width[i] } else { 1.0 };
                        ((simplex[k].0[i] - simplex[0].0[i]) / w).abs()
                    })
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if (spread <= opts.value_tolerance && best.is_finite()) || diameter <= opts.size_tolerance {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(p, _)| p[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect()
        };
        let mut reflected = along(-1.0);
        let fr = eval(&mut reflected, &mut count);
        if fr < simplex[0].1 {
            let mut expanded = along(-2.0);
            let fe = eval(&mut expanded, &mut count);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (mut contracted, fc) = if fr < simplex[n].1 {
                let mut c = along(-0.5);
                let v = eval(&mut c, &mut count);
                (c, v)
            } else {
                let mut c = along(0.5);
                let v = eval(&mut c, &mut count);
                (c, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (std::mem::take(&mut contracted), fc);
            } else {
                let best_point = simplex[0].0.clone();
                for k in 1..=n {
                    let mut p: Vec<f64> = (0..n)
                        .map(|i| best_point[i] + 0.5 * (simplex[k].0[i] - best_point[i]))
                        .collect();
                    let v = eval(&mut p, &mut count);
                    simplex[k] = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evaluations: count }
}
