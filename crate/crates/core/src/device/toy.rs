//! Cheap synthetic stand-in for the photonic simulation.
//!
//! All constants are invented. The model has a resonance whose wavelength
//! moves linearly with the geometry, a Purcell peak that collapses when the
//! cavity detunes from its grating, and a bounded fiber efficiency that
//! couples mode size, absorption and detuning.

use serde::{Deserialize, Serialize};

use crate::design::{presets, DesignPoint};
use crate::objective::ModeResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    /// Resonance wavelength at the reference geometry, nm.
    pub lambda0: f64,
    pub reference: DesignPoint,
    pub fp_peak: f64,
    pub eta_max: f64,
    /// Lorentzian half-width of the Purcell resonance, nm.
    pub q_width: f64,
    /// Optimal spacer and planarization thicknesses and their widths, nm.
    pub sio2_opt: f64,
    pub sio2_width: f64,
    pub cap_opt: f64,
    pub cap_width: f64,
    /// Width of the mode-size mismatch factor, nm.
    pub mode_width: f64,
    /// ITO absorption length, nm.
    pub ito_length: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        let r = presets::NIR_I;
        Self {
            lambda0: 930.3,
            reference: r,
            fp_peak: 25.0,
            eta_max: 0.9,
            q_width: 10.0,
            sio2_opt: r.t_sio2,
            sio2_width: 60.0,
            cap_opt: r.t_hsq - r.t_cbg,
            cap_width: 150.0,
            mode_width: 60.0,
            ito_length: 1000.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyOutput {
    pub lambda_c: f64,
    pub fp: f64,
    pub eta_smf: f64,
    pub eta_na08: f64,
}

impl ToyOutput {
    pub fn mode(&self) -> ModeResult {
        ModeResult { lambda_c: self.lambda_c, fp: self.fp, eta_smf: self.eta_smf, eta_na08: self.eta_na08 }
    }
}

impl ToyConfig {
    /// Cavity-to-grating detuning, nm.
    fn detuning(&self, p: &DesignPoint) -> f64 {
        let c = &self.reference;
        self.lambda0
            * (0.15 * (p.r - c.r) / c.r - 0.1 * (p.p - c.p) / c.p + 0.05 * (p.t_cbg - c.t_cbg) / c.t_cbg
                - 0.1 * (p.w - c.w) / c.w)
    }
}

fn lorentzian(x: f64, half_width: f64) -> f64 {
    1.0 / (1.0 + (x / half_width).powi(2))
}

fn gaussian(x: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((x - centre) / width).powi(2)).exp()
}

/// Evaluates the synthetic cavity. Total on any finite input.
pub fn toy_cavity(p: &DesignPoint, cfg: &ToyConfig) -> ToyOutput {
    let c = &cfg.reference;
    let lambda_c = cfg.lambda0
        * (1.0 + 0.9 * (p.r - c.r) / c.r + 0.5 * (p.p - c.p) / c.p + 0.35 * (p.t_cbg - c.t_cbg) / c.t_cbg
            - 0.1 * (p.w - c.w) / c.w);
    let delta = cfg.detuning(p);
    let fp = 1.0
        + cfg.fp_peak
            * lorentzian(delta, cfg.q_width)
            * gaussian(p.t_sio2, cfg.sio2_opt, cfg.sio2_width)
            * gaussian(p.t_hsq - p.t_cbg, cfg.cap_opt, cfg.cap_width);
    let mode = gaussian(p.r + 0.5 * p.w, c.r + 0.5 * c.w, cfg.mode_width);
    let absorption = (-p.t_ito.max(0.0) / cfg.ito_length).exp();
    let eta_smf = (cfg.eta_max * mode * absorption * lorentzian(delta, 2.0 * cfg.q_width)).clamp(0.0, 1.0);
    ToyOutput { lambda_c, fp, eta_smf, eta_na08: (1.08 * eta_smf).min(1.0) }
}
