//! Axisymmetric finite-volume Laplace solver for the contacted grating.
//!
//! Nodes sit on a tensor grid in `(r, z)`. Permittivity is constant per grid
//! cell and every material interface lies on a grid line, so face
//! coefficients are exact area-weighted sums over the adjacent cells. The
//! gold mirror (`z = 0`) is grounded, the top contact is held at `U`, and
//! the axis and the outer radius carry no flux.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::capacitor::{Permittivities, V_PER_NM_TO_KV_PER_CM};
use crate::design::DesignPoint;
use crate::error::{invalid, Error, Result};

/// Grid resolution and extent, nm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Radial spacing inside the grating.
    pub h_grating: f64,
    /// Largest radial spacing outside the grating.
    pub h_outer: f64,
    /// Vertical spacing.
    pub h_z: f64,
    /// Outer radius of the capacitor.
    pub radius: f64,
    /// Etched rings around the central disc; 0 gives a planar slab.
    pub rings: usize,
    /// Ratio between neighbouring radial spacings outside the grating.
    pub grading: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { h_grating: 5.0, h_outer: 100.0, h_z: 5.0, radius: 7000.0, rings: 10, grading: 1.2 }
    }
}

impl GridSpec {
    pub fn with_spacing(&self, h: f64) -> Self {
        Self { h_grating: h, h_z: h, ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { relative_tolerance: 1e-10, max_iterations: 20_000 }
    }
}

/// Nodes covering `[a, b]` with spacing at most `h`, uniform within the
/// segment; `a` is included, `b` is not.
fn fill_uniform(out: &mut Vec<f64>, a: f64, b: f64, h: f64) {
    let n = ((b - a) / h).ceil().max(1.0) as usize;
    for k in 0..n {
        out.push(a + (b - a) * k as f64 / n as f64);
    }
}

/// Nodes from `a` to `b` starting at spacing `h0` and growing by `ratio` up
/// to `h_max`.
fn fill_graded(out: &mut Vec<f64>, a: f64, b: f64, h0: f64, h_max: f64, ratio: f64) {
    let mut steps = Vec::new();
    let mut h = h0;
    let mut total = 0.0;
    while total < b - a {
        h = (h * ratio).min(h_max);
        steps.push(h);
        total += h;
    }
    let scale = (b - a) / total;
    let mut x = a;
    for s in steps {
        out.push(x);
        x += s * scale;
    }
}

fn dedup_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// Geometry of one solve: node coordinates and cell permittivities.
struct Mesh {
    r: Vec<f64>,
    z: Vec<f64>,
    /// `(nr − 1) × (nz − 1)` cell permittivities, row-major in `z`.
    eps: Vec<f64>,
    probe_j: usize,
}

fn build_mesh(p: &DesignPoint, eps: &Permittivities, grid: &GridSpec) -> Result<Mesh> {
    p.validate()?;
    eps.validate()?;
    let positive = [grid.h_grating, grid.h_outer, grid.h_z, grid.radius, grid.grading];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || grid.grading < 1.0 {
        return Err(invalid("grid spacings and radius must be positive and grading at least 1"));
    }
    if grid.rings > 0 && grid.h_grating > p.w / 4.0 {
        return Err(invalid(format!(
            "grating spacing {} nm exceeds a quarter of the gap width {} nm",
            grid.h_grating, p.w
        )));
    }
    // Trench k spans [R + kP, R + kP + W].
    let trenches: Vec<(f64, f64)> = (0..grid.rings).map(|k| (p.r + k as f64 * p.p, p.r + k as f64 * p.p + p.w)).collect();
    let grating_end = trenches.last().map_or(p.r, |t| t.1 + (p.p - p.w));
    if grating_end >= grid.radius {
        return Err(invalid("grating extends beyond the capacitor radius"));
    }
    let mut breaks = vec![0.0, p.r];
    for &(a, b) in &trenches {
        breaks.extend([a, b]);
    }
    breaks.push(grating_end);
    let breaks = dedup_breaks(breaks);
    let mut r = Vec::new();
    for w in breaks.windows(2) {
        fill_uniform(&mut r, w[0], w[1], grid.h_grating);
    }
    fill_graded(&mut r, grating_end, grid.radius, grid.h_grating, grid.h_outer, grid.grading);
    r.push(grid.radius);

    let z_slab = (p.t_sio2, p.t_sio2 + p.t_cbg);
    let z_top = p.t_sio2 + p.t_hsq;
    let z_probe = 0.5 * (z_slab.0 + z_slab.1);
    let zb = dedup_breaks(vec![0.0, z_slab.0, z_probe, z_slab.1, z_top]);
    let mut z = Vec::new();
    for w in zb.windows(2) {
        fill_uniform(&mut z, w[0], w[1], grid.h_z);
    }
    z.push(z_top);
    let probe_j = z
        .iter()
        .position(|v| (v - z_probe).abs() < 1e-9)
        .expect("probe height is a grid line");

    let (nr, nz) = (r.len(), z.len());
    let mut cells = Vec::with_capacity((nr - 1) * (nz - 1));
    for j in 0..nz - 1 {
        let zc = 0.5 * (z[j] + z[j + 1]);
        for i in 0..nr - 1 {
            let rc = 0.5 * (r[i] + r[i + 1]);
            let e = if zc < z_slab.0 {
                eps.sio2
            } else if zc < z_slab.1 {
                let in_trench = trenches.iter().any(|&(a, b)| rc > a && rc < b);
                if in_trench { eps.hsq } else { eps.slab }
            } else {
                eps.hsq
            };
            cells.push(e);
        }
    }
    Ok(Mesh { r, z, eps: cells, probe_j })
}

/// Potential and derived field of one solve.
#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    /// Node potentials, row-major in `z` (`phi[j * r.len() + i]`), V.
    pub phi: Vec<f64>,
    pub voltage: f64,
    /// Probe position `(r, z)`, nm.
    pub probe: (f64, f64),
    /// Field components at the probe, kV/cm.
    pub probe_field: (f64, f64),
    pub iterations: usize,
    pub residual: f64,
    /// Net downward displacement flux through each horizontal row of faces,
    /// in units of ε0·V·nm.
    pub row_flux: Vec<f64>,
}

impl FieldSolution {
    pub fn potential(&self, i: usize, j: usize) -> f64 {
        self.phi[j * self.r.len() + i]
    }

    /// The same solution at bias `u`, using linearity.
    pub fn scaled(&self, u: f64) -> Self {
        let k = u / self.voltage;
        Self {
            phi: self.phi.iter().map(|v| v * k).collect(),
            voltage: u,
            probe_field: (self.probe_field.0 * k, self.probe_field.1 * k),
            row_flux: self.row_flux.iter().map(|f| f * k).collect(),
            ..self.clone()
        }
    }

    /// `|E|` at the probe, kV/cm.
    pub fn probe_field_abs(&self) -> f64 {
        self.probe_field.0.hypot(self.probe_field.1)
    }

    /// `(E_r, E_z)` at node `(i, j)` from central differences (one-sided on
    /// the boundary), kV/cm.
    pub fn field_at(&self, i: usize, j: usize) -> (f64, f64) {
        let nr = self.r.len();
        let nz = self.z.len();
        let d = |a: usize, b: usize, along_r: bool| -> f64 {
            if along_r {
                -(self.potential(b, j) - self.potential(a, j)) / (self.r[b] - self.r[a])
            } else {
                -(self.potential(i, b) - self.potential(i, a)) / (self.z[b] - self.z[a])
            }
        };
        let er = if i == 0 { 0.0 } else { d(i - 1, (i + 1).min(nr - 1), true) };
        let ez = d(j.saturating_sub(1), (j + 1).min(nz - 1), false);
        (er * V_PER_NM_TO_KV_PER_CM, ez * V_PER_NM_TO_KV_PER_CM)
    }

    /// Largest relative deviation of any row flux from the flux into the
    /// grounded contact.
    pub fn flux_imbalance(&self) -> f64 {
        let reference = self.row_flux[0];
        self.row_flux.iter().map(|f| ((f - reference) / reference).abs()).fold(0.0, f64::max)
    }

    /// Writes `r_nm,z_nm,phi_V,E_r_kV_cm,E_z_kV_cm` for every `stride`-th node
    /// within `max_radius`.
    pub fn write_field_map<W: Write>(&self, mut out: W, stride: usize, max_radius: f64) -> Result<()> {
        let stride = stride.max(1);
        writeln!(out, "r_nm,z_nm,phi_V,E_r_kV_cm,E_z_kV_cm")?;
        for j in (0..self.z.len()).step_by(stride) {
            for i in (0..self.r.len()).step_by(stride).filter(|i| self.r[*i] <= max_radius) {
                let (er, ez) = self.field_at(i, j);
                writeln!(out, "{},{},{:.12e},{:.12e},{:.12e}", self.r[i], self.z[j], self.potential(i, j), er, ez)?;
            }
        }
        Ok(())
    }
}

/// Sparse five-point system over the interior rows.
struct System {
    nr: usize,
    rows: usize,
    /// Coupling between `(i, j)` and `(i + 1, j)`.
    east: Vec<f64>,
    /// Coupling between `(i, j)` and `(i, j + 1)` for `j = 0..nz−1`, all rows
    /// including the contact links.
    north: Vec<f64>,
    diag: Vec<f64>,
}

fn assemble(mesh: &Mesh) -> System {
    let (r, z) = (&mesh.r, &mesh.z);
    let (nr, nz) = (r.len(), z.len());
    let cell = |i: usize, j: usize| mesh.eps[j * (nr - 1) + i];
    // Radial control-volume edges.
    let edge: Vec<f64> = (0..=nr)
        .map(|i| match i {
            0 => 0.0,
            _ if i == nr => r[nr - 1],
            _ => 0.5 * (r[i - 1] + r[i]),
        })
        .collect();

    let mut north = vec![0.0; nr * (nz - 1)];
    for j in 0..nz - 1 {
        let dz = z[j + 1] - z[j];
        for i in 0..nr {
            let mut a = 0.0;
            if i > 0 {
                a += cell(i - 1, j) * 0.5 * (r[i] * r[i] - edge[i] * edge[i]);
            }
            if i < nr - 1 {
                a += cell(i, j) * 0.5 * (edge[i + 1] * edge[i + 1] - r[i] * r[i]);
            }
            north[j * nr + i] = a / dz;
        }
    }
    let rows = nz - 2;
    let mut east = vec![0.0; nr * rows];
    for jj in 0..rows {
        let j = jj + 1;
        let (below, above) = (0.5 * (z[j] - z[j - 1]), 0.5 * (z[j + 1] - z[j]));
        for i in 0..nr - 1 {
            let face = 0.5 * (r[i] + r[i + 1]);
            east[jj * nr + i] = face * (cell(i, j - 1) * below + cell(i, j) * above) / (r[i + 1] - r[i]);
        }
    }
    let mut diag = vec![0.0; nr * rows];
    for jj in 0..rows {
        let j = jj + 1;
        for i in 0..nr {
            let k = jj * nr + i;
            let mut d = north[(j - 1) * nr + i] + north[j * nr + i];
            if i > 0 {
                d += east[k - 1];
            }
            if i < nr - 1 {
                d += east[k];
            }
            diag[k] = d;
        }
    }
    System { nr, rows, east, north, diag }
}

impl System {
    fn len(&self) -> usize {
        self.nr * self.rows
    }

    /// Coupling of unknown `k` to `k − nr` (south) within the interior.
    fn south(&self, k: usize) -> f64 {
        // Interior row jj couples to jj − 1 through north row jj.
        self.north[k]
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nr = self.nr;
        for k in 0..self.len() {
            let i = k % nr;
            let mut v = self.diag[k] * x[k];
            if i > 0 {
                v -= self.east[k - 1] * x[k - 1];
            }
            if i < nr - 1 {
                v -= self.east[k] * x[k + 1];
            }
            if k >= nr {
                v -= self.south(k) * x[k - nr];
            }
            if k + nr < self.len() {
                v -= self.south(k + nr) * x[k + nr];
            }
            y[k] = v;
        }
    }

    /// Pivots of the zero-fill incomplete Cholesky factor.
    fn ic0(&self) -> Vec<f64> {
        let nr = self.nr;
        let mut d = vec![0.0; self.len()];
        for k in 0..self.len() {
            let mut v = self.diag[k];
            if k % nr > 0 {
                v -= self.east[k - 1].powi(2) / d[k - 1];
            }
            if k >= nr {
                v -= self.south(k).powi(2) / d[k - nr];
            }
            d[k] = v;
        }
        d
    }

    fn precondition(&self, d: &[f64], r: &[f64], out: &mut [f64]) {
        let nr = self.nr;
        let n = self.len();
        for k in 0..n {
            let mut v = r[k];
            if k % nr > 0 {
                v += self.east[k - 1] * out[k - 1];
            }
            if k >= nr {
                v += self.south(k) * out[k - nr];
            }
            out[k] = v / d[k];
        }
        for k in (0..n).rev() {
            let mut v = 0.0;
            if k % nr < nr - 1 {
                v += self.east[k] * out[k + 1];
            }
            if k + nr < n {
                v += self.south(k + nr) * out[k + nr];
            }
            out[k] += v / d[k];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(sys: &System, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64)> {
    let n = sys.len();
    let d = sys.ic0();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut zv = vec![0.0; n];
    sys.precondition(&d, &r, &mut zv);
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut q = vec![0.0; n];
    for it in 1..=opts.max_iterations {
        sys.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel < opts.relative_tolerance {
            // Confirm against the true residual.
            sys.apply(&x, &mut q);
            let true_rel = q.iter().zip(b).map(|(a, c)| (c - a).powi(2)).sum::<f64>().sqrt() / bnorm;
            if true_rel < opts.relative_tolerance {
                return Ok((x, it, true_rel));
            }
        }
        sys.precondition(&d, &r, &mut zv);
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = zv[k] + beta * p[k];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err(Error::Solver { residual: rel, iterations: opts.max_iterations })
}

/// Solves for the potential with the top contact at `u` volts. The probe
/// sits on the axis at the vertical center of the slab.
pub fn fd_axisym_solve(
    p: &DesignPoint,
    eps: &Permittivities,
    grid: &GridSpec,
    u: f64,
    opts: &SolverOptions,
) -> Result<FieldSolution> {
    if !u.is_finite() {
        return Err(invalid("bias voltage must be finite"));
    }
    let mesh = build_mesh(p, eps, grid)?;
    let sys = assemble(&mesh);
    let (nr, nz) = (mesh.r.len(), mesh.z.len());
    let top = nz - 2;
    let mut b = vec![0.0; sys.len()];
    for i in 0..nr {
        b[(top - 1) * nr + i] = sys.north[top * nr + i] * u;
    }
    let (x, iterations, residual) = pcg(&sys, &b, opts)?;
    let mut phi = vec![0.0; nr * nz];
    phi[nr..nr * (nz - 1)].copy_from_slice(&x);
    for v in &mut phi[nr * (nz - 1)..] {
        *v = u;
    }
    let row_flux = (0..nz - 1)
        .map(|j| (0..nr).map(|i| sys.north[j * nr + i] * (phi[(j + 1) * nr + i] - phi[j * nr + i])).sum())
        .collect();
    let j = mesh.probe_j;
    let ez = -(phi[(j + 1) * nr] - phi[(j - 1) * nr]) / (mesh.z[j + 1] - mesh.z[j - 1]);
    let probe = (0.0, mesh.z[j]);
    Ok(FieldSolution {
        r: mesh.r,
        z: mesh.z,
        phi,
        voltage: u,
        probe,
        probe_field: (0.0, ez * V_PER_NM_TO_KV_PER_CM),
        iterations,
        residual,
        row_flux,
    })
}

/// Probe field over a list of voltages from a single unit solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiasSweep {
    /// `|E|` per volt, kV/cm/V.
    pub field_per_volt: f64,
    pub points: Vec<(f64, f64)>,
}

impl BiasSweep {
    /// Voltage at which the probe field reaches `field` kV/cm.
    pub fn voltage_for(&self, field: f64) -> f64 {
        field / self.field_per_volt
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "U_V,E_abs_kV_cm")?;
        for (u, e) in &self.points {
            writeln!(out, "{u},{e:.12e}")?;
        }
        Ok(())
    }
}

pub fn bias_sweep(
    p: &DesignPoint,
    eps: &Permittivities,
    grid: &GridSpec,
    voltages: &[f64],
    opts: &SolverOptions,
) -> Result<(BiasSweep, FieldSolution)> {
    let unit = fd_axisym_solve(p, eps, grid, 1.0, opts)?;
    let per_volt = unit.probe_field_abs();
    let points = voltages.iter().map(|u| (*u, u.abs() * per_volt)).collect();
    Ok((BiasSweep { field_per_volt: per_volt, points }, unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::presets;
    use crate::device::capacitor::{analytic_stack_field, design_stack};

    fn planar() -> GridSpec {
        GridSpec { rings: 0, ..GridSpec::default() }
    }

    #[test]
    fn homogeneous_slab_is_linear() {
        let e = Permittivities { slab: 4.0, sio2: 4.0, hsq: 4.0 };
        let p = presets::NIR_I;
        let s = fd_axisym_solve(&p, &e, &GridSpec { radius: 2000.0, ..planar() }, 3.0, &SolverOptions::default())
            .unwrap();
        let total = p.t_sio2 + p.t_hsq;
        for j in 0..s.z.len() {
            for i in (0..s.r.len()).step_by(17) {
                assert!((s.potential(i, j) - 3.0 * s.z[j] / total).abs() < 1e-6, "{i} {j} {} {}", s.potential(i, j), 3.0 * s.z[j] / total);
            }
        }
        let expected = 3.0 / total * 1e4;
        assert!((s.probe_field_abs() - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn planar_stack_matches_series_formula() {
        let p = presets::NIR_I;
        let eps = Permittivities::gaas();
        let s = fd_axisym_solve(&p, &eps, &GridSpec { radius: 2000.0, ..planar() }, 10.0, &SolverOptions::default())
            .unwrap();
        let a = analytic_stack_field(&design_stack(&p, &eps).unwrap(), 1, 10.0).unwrap();
        assert!((s.probe_field_abs() - a).abs() < 1e-6 * a, "{} vs {a}", s.probe_field_abs());
    }

    #[test]
    fn grating_solution_is_bounded_and_conservative() {
        let p = presets::NIR_I;
        let grid = GridSpec { rings: 3, radius: 3000.0, h_grating: 10.0, h_z: 10.0, ..GridSpec::default() };
        let s = fd_axisym_solve(&p, &Permittivities::gaas(), &grid, 5.0, &SolverOptions::default()).unwrap();
        assert!(s.phi.iter().all(|v| (-1e-12..=5.0 + 1e-12).contains(v)));
        assert!(s.flux_imbalance() < 1e-3, "{}", s.flux_imbalance());
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn spacing_precondition() {
        let p = presets::NIR_I;
        let grid = GridSpec { h_grating: p.w / 3.0, ..GridSpec::default() };
        assert!(fd_axisym_solve(&p, &Permittivities::gaas(), &grid, 1.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn sweep_is_linear() {
        let p = presets::NIR_I;
        let grid = GridSpec { rings: 2, radius: 2000.0, h_grating: 10.0, h_z: 10.0, ..GridSpec::default() };
        let (sweep, _) = bias_sweep(&p, &Permittivities::gaas(), &grid, &[1.0, 2.0, 5.0, 10.0], &SolverOptions::default())
            .unwrap();
        let e = |u: f64| sweep.points.iter().find(|x| x.0 == u).unwrap().1;
        assert!((e(2.0) - 2.0 * e(1.0)).abs() <= 1e-12 * e(2.0));
        assert!((e(10.0) - 2.0 * e(5.0)).abs() <= 1e-12 * e(10.0));
    }

    #[test]
    fn field_map_has_header_and_rows() {
        let p = presets::NIR_I;
        let grid = GridSpec { rings: 1, radius: 1500.0, h_grating: 20.0, h_z: 20.0, ..GridSpec::default() };
        let s = fd_axisym_solve(&p, &Permittivities::gaas(), &grid, 1.0, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        s.write_field_map(&mut buf, 2, 1000.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r_nm,z_nm,phi_V,E_r_kV_cm,E_z_kV_cm\n"));
        assert!(text.lines().count() > 10);
    }

    #[test]
    fn grating_raises_probe_field_and_converges() {
        let p = presets::NIR_I;
        let base = GridSpec { rings: 2, radius: 3000.0, ..GridSpec::default() };
        let solve = |h: f64| {
            fd_axisym_solve(&p, &Permittivities::gaas(), &base.with_spacing(h), 1.0, &SolverOptions::default())
                .unwrap()
                .probe_field_abs()
        };
        let (e10, e5) = (solve(10.0), solve(5.0));
        let planar = fd_axisym_solve(&p, &Permittivities::gaas(), &GridSpec { rings: 0, ..base }, 1.0, &SolverOptions::default())
            .unwrap()
            .probe_field_abs();
        assert!(e5 > 1.05 * planar, "{e5} vs {planar}");
        assert!((e10 - e5).abs() < 1e-3 * e5);
    }

    /// Uniform grids and a weak permittivity contrast, so that corner
    /// singularities at the trench edges do not mask the discretization order.
    #[test]
    fn second_order_under_refinement() {
        let p = presets::NIR_I;
        let eps = Permittivities { slab: 4.2, sio2: 3.9, hsq: 3.9 };
        let base = GridSpec { rings: 2, radius: 1500.0, ..GridSpec::default() };
        let solve = |h: f64| {
            let grid = GridSpec { h_outer: h, ..base.with_spacing(h) };
            fd_axisym_solve(&p, &eps, &grid, 1.0, &SolverOptions::default()).unwrap().probe_field_abs()
        };
        let e: Vec<f64> = [10.0, 5.0, 2.5].iter().map(|h| solve(*h)).collect();
        let reference = e[2] + (e[2] - e[1]) / 3.0;
        let reduction = (e[0] - reference).abs() / (e[1] - reference).abs();
        assert!(reduction >= 3.0, "error reduction {reduction} per halving ({e:?})");
    }
}
