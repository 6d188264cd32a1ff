//! Scalar target combining fiber efficiency, Purcell enhancement and
//! operation wavelength. Smaller is better.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Weights and calibration of the target function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSpec {
    /// Design wavelength, nm.
    pub lambda_des: f64,
    pub fp_des: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Sigmoid slope; negative so that `S` increases with `F_P`.
    pub sigmoid_a: f64,
    pub sigmoid_b: f64,
    /// Parabola curvature, nm⁻².
    pub parabola_c: f64,
    /// Modes further than this from `lambda_des` are ignored, nm.
    pub mode_window: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::new(930.0)
    }
}

impl ObjectiveSpec {
    /// Defaults with `S(1) = 0.1`, `S(20) = 0.9` and `f3(λ_des ± 10 nm) = 0.1`.
    pub fn new(lambda_des: f64) -> Self {
        Self {
            lambda_des,
            fp_des: 20.0,
            w1: 2.0,
            w2: 1.0,
            w3: 1.0,
            sigmoid_a: -(9.0f64).ln() / 9.5,
            sigmoid_b: 10.5,
            parabola_c: 1e-3,
            mode_window: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda_des,
            self.fp_des,
            self.w1,
            self.w2,
            self.w3,
            self.sigmoid_a,
            self.sigmoid_b,
            self.parabola_c,
            self.mode_window,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("objective parameters must be finite"));
        }
        if self.w1 < 0.0 || self.w2 < 0.0 || self.w3 < 0.0 {
            return Err(invalid("objective weights must be non-negative"));
        }
        if self.sigmoid_a >= 0.0 {
            return Err(invalid("sigmoid_a must be negative"));
        }
        if self.parabola_c < 0.0 || self.mode_window <= 0.0 {
            return Err(invalid("parabola_c must be non-negative and mode_window positive"));
        }
        Ok(())
    }

    /// `S(x) = 1 / (1 + exp(a (x − b)))`.
    pub fn sigmoid(&self, fp: f64) -> f64 {
        1.0 / (1.0 + (self.sigmoid_a * (fp - self.sigmoid_b)).exp())
    }

    pub fn scaled_weights(&self, factor: f64) -> Self {
        Self { w1: self.w1 * factor, w2: self.w2 * factor, w3: self.w3 * factor, ..self.clone() }
    }
}

/// One cavity mode as seen by the target function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    /// Resonance wavelength, nm.
    pub lambda_c: f64,
    pub fp: f64,
    pub eta_smf: f64,
    pub eta_na08: f64,
}

impl ModeResult {
    pub fn new(lambda_c: f64, fp: f64, eta_smf: f64) -> Self {
        Self { lambda_c, fp, eta_smf, eta_na08: eta_smf }
    }
}

pub fn f1(eta_smf: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_smf) {
        return Err(Error::Domain(format!("efficiency {eta_smf} is outside [0, 1]")));
    }
    Ok(1.0 - eta_smf)
}

pub fn f2(fp: f64, spec: &ObjectiveSpec) -> f64 {
    1.0 - spec.sigmoid(fp)
}

pub fn f3(lambda: f64, spec: &ObjectiveSpec) -> f64 {
    spec.parabola_c * (lambda - spec.lambda_des).powi(2)
}

/// `w1·f1 + w2·f2 + w3·f3`.
pub fn target(mode: &ModeResult, spec: &ObjectiveSpec) -> Result<f64> {
    Ok(spec.w1 * f1(mode.eta_smf)? + spec.w2 * f2(mode.fp, spec) + spec.w3 * f3(mode.lambda_c, spec))
}

/// Mode with the smallest target. Ties go to the mode closest to
/// `lambda_des`, then to the earlier one.
pub fn best_mode(modes: &[ModeResult], spec: &ObjectiveSpec) -> Result<(ModeResult, f64)> {
    let mut best: Option<(ModeResult, f64)> = None;
    for m in modes {
        let v = target(m, spec)?;
        let better = match &best {
            None => true,
            Some((b, bv)) => {
                v < *bv || (v == *bv && (m.lambda_c - spec.lambda_des).abs() < (b.lambda_c - spec.lambda_des).abs())
            }
        };
        if better {
            best = Some((*m, v));
        }
    }
    best.ok_or_else(|| invalid("no modes to choose from"))
}

/// Modes within the acceptance window around `lambda_des`.
pub fn modes_in_window<'a>(modes: &'a [ModeResult], spec: &ObjectiveSpec) -> impl Iterator<Item = &'a ModeResult> {
    let (centre, window) = (spec.lambda_des, spec.mode_window);
    modes.iter().filter(move |m| (m.lambda_c - centre).abs() <= window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ObjectiveSpec {
        ObjectiveSpec::new(930.0)
    }

    #[test]
    fn efficiency_term() {
        assert_eq!(f1(1.0).unwrap(), 0.0);
        assert_eq!(f1(0.0).unwrap(), 1.0);
        assert!((f1(0.866).unwrap() - 0.134).abs() < 1e-12);
        assert!(f1(1.01).is_err() && f1(-0.1).is_err());
    }

    #[test]
    fn sigmoid_calibration() {
        let s = spec();
        assert!((f2(s.sigmoid_b, &s) - 0.5).abs() < 1e-15);
        assert!((f2(20.0, &s) - 0.1).abs() < 1e-12);
        assert!((f2(1.0, &s) - 0.9).abs() < 1e-12);
        assert!(s.sigmoid(20.0) > 0.8 && s.sigmoid(1.0) < 0.2);
        assert!(f2(1e6, &s) < 1e-12);
        assert!((s.sigmoid_a + 0.231_286_797_6).abs() < 1e-10);
    }

    #[test]
    fn wavelength_parabola() {
        let s = spec();
        assert_eq!(f3(930.0, &s), 0.0);
        assert!((f3(940.0, &s) - 0.1).abs() < 1e-12);
        assert!((f3(920.0, &s) - 0.1).abs() < 1e-12);
        assert!((f3(950.0, &s) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn target_examples() {
        let s = spec();
        let ideal = ModeResult::new(930.0, 1e6, 1.0);
        assert!(target(&ideal, &s).unwrap() < 1e-5);
        let nir = ModeResult::new(930.3, 22.1, 0.866);
        let expected = 2.0 * 0.134 + (1.0 - 1.0 / (1.0 + (s.sigmoid_a * (22.1 - 10.5)).exp())) + 1e-3 * 0.09;
        assert!((target(&nir, &s).unwrap() - expected).abs() < 1e-12);
        let zero = ObjectiveSpec { w1: 0.0, w2: 0.0, w3: 0.0, ..s };
        assert_eq!(target(&nir, &zero).unwrap(), 0.0);
    }

    #[test]
    fn best_mode_rules() {
        let s = spec();
        assert!(best_mode(&[], &s).is_err());
        let a = ModeResult::new(925.0, 10.0, 0.5);
        let b = ModeResult::new(935.0, 10.0, 0.5);
        let (m, _) = best_mode(&[a, b], &s).unwrap();
        assert_eq!(m, a);
        let (m, _) = best_mode(&[b, a], &s).unwrap();
        assert_eq!(m, b);
        let hi_fp = ModeResult::new(930.0, 20.0, 0.5);
        let hi_eta = ModeResult::new(930.0, 5.0, 0.9);
        assert_eq!(best_mode(&[hi_fp, hi_eta], &s).unwrap().0, hi_eta);
        assert_eq!(best_mode(&[hi_fp, hi_eta], &s.scaled_weights(3.5)).unwrap().0, hi_eta);
    }

    #[test]
    fn target_is_monotone_and_linear_in_weights() {
        let s = spec();
        let base = ModeResult::new(936.0, 12.0, 0.6);
        let t0 = target(&base, &s).unwrap();
        assert!(target(&ModeResult { eta_smf: 0.7, ..base }, &s).unwrap() <= t0);
        assert!(target(&ModeResult { fp: 13.0, ..base }, &s).unwrap() <= t0);
        assert!(target(&ModeResult { lambda_c: 933.0, ..base }, &s).unwrap() <= t0);
        let doubled = target(&base, &s.scaled_weights(2.0)).unwrap();
        assert!((doubled - 2.0 * t0).abs() < 1e-14);
    }

    #[test]
    fn window_filter() {
        let s = spec();
        let modes = [ModeResult::new(870.0, 5.0, 0.5), ModeResult::new(960.0, 5.0, 0.5)];
        assert_eq!(modes_in_window(&modes, &s).count(), 1);
    }

    #[test]
    fn validation() {
        assert!(spec().validate().is_ok());
        assert!(ObjectiveSpec { sigmoid_a: 0.1, ..spec() }.validate().is_err());
        assert!(ObjectiveSpec { w2: -1.0, ..spec() }.validate().is_err());
    }
}
