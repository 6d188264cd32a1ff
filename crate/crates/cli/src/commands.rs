//! Subcommand implementations. Every artifact carries the config hash and
//! seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use rdopt::bayesopt::{optimize, BoOptions, Evaluation};
use rdopt::design::PARAMETER_NAMES;
use rdopt::device::{analytic_stack_field, bias_sweep, design_stack, fd_axisym_solve, toy_cavity, GridSpec, ToyConfig};
use rdopt::model_file::{decode_bundle, encode_bundle, encode_gp};
use rdopt::objective::{target, ModeResult};
use rdopt::robustness::{
    analyze, check_inside, fit_bundle, robust_optimize, train_bundle_on, verify, Quantity, RobustOptions,
    SurrogateBundle, TrainOptions,
};
use rdopt::sampling::training_domain;
use rdopt::DesignPoint;
use serde::Serialize;

use crate::config::{OracleConfig, RunConfig};
use crate::oracle::Oracle;
use crate::CliError;

/// Field strength whose bias voltage is reported, kV/cm.
const TARGET_FIELD: f64 = 100.0;

/// Output directory plus the provenance stamped onto every file.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    seed: u64,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_sha256: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

impl Artifacts {
    pub fn new(dir: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), hash: cfg.hash(), seed: cfg.seed() })
    }

    pub fn tag(&self) -> String {
        format!("config_sha256={} seed={}", self.hash, self.seed)
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<(), CliError> {
        let stamped = Stamped { config_sha256: &self.hash, seed: self.seed, body };
        let mut text = serde_json::to_string_pretty(&stamped).expect("serializable output");
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }

    /// Writes a CSV whose first line is a `#` comment with the provenance.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> rdopt::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# {}", self.tag())?;
        body(&mut buf)?;
        fs::write(self.dir.join(name), buf)?;
        Ok(())
    }

    pub fn bytes(&self, name: &str, data: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), data)?;
        Ok(())
    }
}

fn design_columns() -> String {
    PARAMETER_NAMES.join(",")
}

fn design_row(p: &DesignPoint) -> String {
    p.to_array().iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

pub fn optimize_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let space = cfg.optimize.domain.search_space()?;
    let oracle = Oracle::from_config(&cfg.oracle)?;
    let objective = &cfg.objective;
    let opts = BoOptions {
        budget: cfg.optimize.budget,
        init_count: cfg.optimize.init_count,
        seed: cfg.seed(),
        ..BoOptions::default()
    };
    let evaluator = |x: &[f64]| -> Result<Evaluation, String> {
        let d = space.design(x);
        let m = oracle.evaluate(&d)?;
        if (m.lambda_c - objective.lambda_des).abs() > objective.mode_window {
            return Err(format!("no mode within {} nm of the design wavelength", objective.mode_window));
        }
        let value = target(&m, objective).map_err(|e| e.to_string())?;
        Ok(Evaluation { value, extras: vec![m.lambda_c, m.fp, m.eta_smf, m.eta_na08] })
    };
    info!("optimizing over {} free parameters, budget {}", space.domain.dim(), opts.budget);
    let state = optimize(evaluator, &space.domain, &opts)?;

    out.csv("history.csv", |w| {
        writeln!(w, "index,{},status,target,lambda_c,fp,eta_smf,eta_na08", design_columns())?;
        for (i, o) in state.history().iter().enumerate() {
            let d = design_row(&space.design(&o.point));
            match o.value {
                Some(v) => {
                    let e = &o.extras;
                    writeln!(w, "{i},{d},ok,{v},{},{},{},{}", e[0], e[1], e[2], e[3])?
                }
                None => writeln!(w, "{i},{d},failed,,,,,")?,
            }
        }
        Ok(())
    })?;

    let best = state.best().ok_or_else(|| CliError::Core(rdopt::Error::State("every evaluation failed".into())))?;
    let e = &best.extras;
    #[derive(Serialize)]
    struct Best {
        design: DesignPoint,
        target: f64,
        performance: ModeResult,
        evaluations: usize,
        failures: usize,
        best_index: usize,
    }
    let best_index = state.history().iter().position(|o| std::ptr::eq(o, best)).unwrap_or(0);
    out.json(
        "best.json",
        &Best {
            design: space.design(&best.point),
            target: best.value.expect("incumbent has a value"),
            performance: ModeResult { lambda_c: e[0], fp: e[1], eta_smf: e[2], eta_na08: e[3] },
            evaluations: state.history().len(),
            failures: state.history().iter().filter(|o| o.value.is_none()).count(),
            best_index,
        },
    )?;
    if let Some(gp) = state.surrogate() {
        out.bytes("surrogate.bin", &encode_gp(gp, &out.tag()))?;
    }
    info!("best target {:.6}", best.value.unwrap_or(f64::NAN));
    Ok(())
}

/// Loads the configured surrogate or trains one, after checking that the
/// tolerance distribution around `mean` (widened by `extra_sigma`) stays
/// inside the training box.
fn obtain_bundle(cfg: &RunConfig, out: &Artifacts, mean: &DesignPoint, extra_sigma: &[f64; 7]) -> Result<SurrogateBundle, CliError> {
    let tol = &cfg.tolerances;
    if let Some(path) = &cfg.training.surrogate {
        let bytes = fs::read(path)?;
        let bundle = decode_bundle(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        check_inside(&bundle.domain, mean, tol, extra_sigma)?;
        info!("loaded surrogate with {} training points", bundle.training_count());
        return Ok(bundle);
    }
    let domain = training_domain(&cfg.center, tol, &cfg.training.scales.to_array())?;
    check_inside(&domain, mean, tol, extra_sigma)?;
    let oracle = Oracle::from_config(&cfg.oracle)?;
    let bundle = match (&oracle, &cfg.oracle) {
        (Oracle::Table(table), _) => {
            let (points, modes): (Vec<Vec<f64>>, Vec<ModeResult>) =
                table.rows().iter().map(|(p, m)| (p.to_array().to_vec(), *m)).unzip();
            info!("fitting surrogates to {} table rows", points.len());
            fit_bundle(points, &modes, &domain, &TrainOptions::default())?
        }
        (_, OracleConfig::Toy { .. }) => {
            info!("training surrogates on {} Sobol points", cfg.training.count);
            train_bundle_on(|p| oracle.evaluate(p), &domain, cfg.training.count, cfg.seed(), &TrainOptions::default())?
        }
        _ => unreachable!("oracle kinds match their config"),
    };
    out.bytes("surrogate.bin", &encode_bundle(&bundle, &out.tag()))?;
    Ok(bundle)
}

pub fn robustness_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let mean = cfg.analysis_mean();
    let bundle = obtain_bundle(cfg, out, &mean, &[0.0; 7])?;
    let report = analyze(&bundle, &mean, &cfg.tolerances, cfg.analysis.samples, cfg.seed())?;
    #[derive(Serialize)]
    struct Formatted {
        lambda_c_nm: String,
        fp: String,
        eta_smf_percent: String,
    }
    #[derive(Serialize)]
    struct Report<'a> {
        training_count: usize,
        #[serde(flatten)]
        report: &'a rdopt::robustness::RobustnessReport,
        formatted: Formatted,
    }
    out.json(
        "robustness_report.json",
        &Report {
            training_count: bundle.training_count(),
            report: &report,
            formatted: Formatted {
                lambda_c_nm: report.lambda_c.format_triple(1.0, 2),
                fp: report.fp.format_triple(1.0, 1),
                eta_smf_percent: report.eta_smf.format_triple(100.0, 1),
            },
        },
    )?;
    for q in Quantity::ALL {
        out.csv(&format!("hist_{}.csv", q.key()), |w| report.get(q).write_histogram_csv(w))?;
    }
    for line in report.to_string().lines() {
        info!("{line}");
    }
    Ok(())
}

pub fn robust_optimize_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let bounds = cfg.robust.mu_bounds_sigma.to_array();
    let bundle = obtain_bundle(cfg, out, &cfg.center, &bounds)?;
    let opts = RobustOptions {
        mu_bounds_sigma: bounds,
        n_samples: cfg.robust.samples,
        bo: BoOptions {
            budget: cfg.robust.budget,
            init_count: cfg.robust.init_count,
            seed: cfg.seed(),
            ..BoOptions::default()
        },
        seed: cfg.seed(),
    };
    let best = robust_optimize(&bundle, &cfg.center, &cfg.tolerances, &cfg.objective, &opts)?;
    #[derive(Serialize)]
    struct RobustBest<'a> {
        #[serde(flatten)]
        best: &'a rdopt::robustness::RobustOptimum,
        point_value: f64,
        mu_bounds_sigma: DesignPoint,
        tolerances: rdopt::sampling::ToleranceSpec,
        samples_per_evaluation: usize,
    }
    out.json(
        "robust_best.json",
        &RobustBest {
            best: &best,
            point_value: target(&best.point_performance, &cfg.objective)?,
            mu_bounds_sigma: cfg.robust.mu_bounds_sigma,
            tolerances: cfg.tolerances,
            samples_per_evaluation: cfg.robust.samples,
        },
    )?;
    info!("robust target {:.6} at {:?}", best.value, best.mean);
    Ok(())
}

pub fn verify_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let mean = cfg.analysis_mean();
    let bundle = obtain_bundle(cfg, out, &mean, &[0.0; 7])?;
    let oracle = Oracle::from_config(&cfg.oracle)?;
    let summary = verify(&bundle, |p| oracle.evaluate(p), &mean, &cfg.tolerances, cfg.verify.count, cfg.seed())?;
    out.json("verification.json", &summary)?;
    for q in Quantity::ALL {
        let c = summary.get(q);
        info!("{}: median discrepancy {:.4e}, band coverage {:.3}", q.key(), c.median_discrepancy, c.band_coverage);
    }
    Ok(())
}

pub fn capacitor_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let c = &cfg.capacitor;
    let design = c.design.unwrap_or(cfg.center);
    let eps = c.permittivities();
    let analytic = analytic_stack_field(&design_stack(&design, &eps)?, 1, 1.0)?;
    let (sweep, unit) = bias_sweep(&design, &eps, &c.grid, &c.voltages, &c.solver)?;
    let planar_grid = GridSpec { rings: 0, ..c.grid.clone() };
    let planar = fd_axisym_solve(&design, &eps, &planar_grid, 1.0, &c.solver)?;
    let planar_fd = planar.probe_field_abs();
    let deviation = (planar_fd - analytic).abs() / analytic;
    info!("planar stack: FD {planar_fd:.6} vs analytic {analytic:.6} kV/cm per volt (relative deviation {deviation:.2e})");
    info!("grating: {:.6} kV/cm per volt, {TARGET_FIELD} kV/cm at {:.3} V", sweep.field_per_volt, sweep.voltage_for(TARGET_FIELD));

    out.csv("bias_sweep.csv", |w| {
        writeln!(w, "U_V,E_abs_kV_cm,E_planar_analytic_kV_cm")?;
        for (u, e) in &sweep.points {
            writeln!(w, "{u},{e:.12e},{:.12e}", u.abs() * analytic)?;
        }
        Ok(())
    })?;
    let u_map = c.voltages.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let u_map = if u_map > 0.0 { u_map } else { 1.0 };
    out.csv("field_map.csv", |w| {
        writeln!(w, "# U={u_map} V")?;
        unit.scaled(u_map).write_field_map(w, c.field_map_stride, c.field_map_radius)
    })?;

    #[derive(Serialize)]
    struct Summary {
        design: DesignPoint,
        permittivities: rdopt::device::Permittivities,
        grid: GridSpec,
        field_per_volt_kv_cm: f64,
        planar_analytic_field_per_volt_kv_cm: f64,
        planar_fd_field_per_volt_kv_cm: f64,
        planar_relative_deviation: f64,
        voltage_for_100_kv_cm: f64,
        planar_voltage_for_100_kv_cm: f64,
        probe_r_nm: f64,
        probe_z_nm: f64,
        iterations: usize,
        relative_residual: f64,
        flux_imbalance: f64,
    }
    out.json(
        "capacitor.json",
        &Summary {
            design,
            permittivities: eps,
            grid: c.grid.clone(),
            field_per_volt_kv_cm: sweep.field_per_volt,
            planar_analytic_field_per_volt_kv_cm: analytic,
            planar_fd_field_per_volt_kv_cm: planar_fd,
            planar_relative_deviation: deviation,
            voltage_for_100_kv_cm: sweep.voltage_for(TARGET_FIELD),
            planar_voltage_for_100_kv_cm: TARGET_FIELD / analytic,
            probe_r_nm: unit.probe.0,
            probe_z_nm: unit.probe.1,
            iterations: unit.iterations,
            relative_residual: unit.residual,
            flux_imbalance: unit.flux_imbalance(),
        },
    )
}

pub fn toy_eval_cmd(cfg: &RunConfig, out: &Artifacts) -> Result<(), CliError> {
    let toy = match &cfg.oracle {
        OracleConfig::Toy { params } => params.clone(),
        OracleConfig::Table { .. } => ToyConfig::default(),
    };
    let points = if cfg.toy_eval.points.is_empty() { vec![cfg.center] } else { cfg.toy_eval.points.clone() };
    out.csv("toy_eval.csv", |w| {
        writeln!(w, "{},lambda_c,fp,eta_smf,eta_na08,target", design_columns())?;
        for p in &points {
            let m = toy_cavity(p, &toy).mode();
            let t = target(&m, &cfg.objective)?;
            writeln!(w, "{},{},{},{},{},{}", design_row(p), m.lambda_c, m.fp, m.eta_smf, m.eta_na08, t)?;
        }
        Ok(())
    })
}
