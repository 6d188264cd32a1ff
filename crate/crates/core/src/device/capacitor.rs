//! Series-capacitor field of an infinitely extended dielectric stack.

use serde::{Deserialize, Serialize};

use crate::design::DesignPoint;
use crate::error::{invalid, Result};

/// Conversion from V/nm to kV/cm.
pub const V_PER_NM_TO_KV_PER_CM: f64 = 1e4;

/// Relative permittivities of the device materials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Permittivities {
    /// Grating slab (GaAs or InP).
    pub slab: f64,
    pub sio2: f64,
    pub hsq: f64,
}

impl Permittivities {
    pub const GAAS: f64 = 12.9;
    pub const INP: f64 = 12.5;
    pub const SIO2: f64 = 3.9;
    pub const HSQ: f64 = 3.0;

    pub fn gaas() -> Self {
        Self { slab: Self::GAAS, sio2: Self::SIO2, hsq: Self::HSQ }
    }

    pub fn inp() -> Self {
        Self { slab: Self::INP, ..Self::gaas() }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.slab, self.sio2, self.hsq].iter().all(|e| e.is_finite() && *e >= 1.0) {
            Ok(())
        } else {
            Err(invalid("relative permittivities must be finite and at least 1"))
        }
    }
}

impl Default for Permittivities {
    fn default() -> Self {
        Self::gaas()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// nm.
    pub thickness: f64,
    pub eps_r: f64,
}

/// Layers listed from the bottom contact upwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("layer stack is empty"));
        }
        for l in &layers {
            if !(l.thickness > 0.0 && l.thickness.is_finite()) || !(l.eps_r >= 1.0 && l.eps_r.is_finite()) {
                return Err(invalid(format!("invalid layer {l:?}")));
            }
        }
        Ok(Self { layers })
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }
}

/// Planar stack SiO2 / slab / HSQ cap of a design, with the slab at index 1.
pub fn design_stack(p: &DesignPoint, eps: &Permittivities) -> Result<LayerStack> {
    p.validate()?;
    let mut layers = vec![
        Layer { thickness: p.t_sio2, eps_r: eps.sio2 },
        Layer { thickness: p.t_cbg, eps_r: eps.slab },
    ];
    if p.t_hsq > p.t_cbg {
        layers.push(Layer { thickness: p.t_hsq - p.t_cbg, eps_r: eps.hsq });
    }
    LayerStack::new(layers)
}

/// Field in layer `probe` at bias `u` (V), in kV/cm:
/// `E = U / (ε_probe Σ t_j/ε_j)`.
pub fn analytic_stack_field(stack: &LayerStack, probe: usize, u: f64) -> Result<f64> {
    if stack.layers.is_empty() {
        return Err(invalid("layer stack is empty"));
    }
    let layer = stack
        .layers
        .get(probe)
        .ok_or_else(|| invalid(format!("probe layer {probe} out of range")))?;
    let series: f64 = stack.layers.iter().map(|l| l.thickness / l.eps_r).sum();
    Ok(u / (layer.eps_r * series) * V_PER_NM_TO_KV_PER_CM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::presets;

    #[test]
    fn vacuum_plate() {
        let s = LayerStack::new(vec![Layer { thickness: 1000.0, eps_r: 1.0 }]).unwrap();
        assert!((analytic_stack_field(&s, 0, 1.0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn equal_permittivity_is_uniform() {
        let s = LayerStack::new(vec![Layer { thickness: 300.0, eps_r: 4.0 }, Layer { thickness: 700.0, eps_r: 4.0 }])
            .unwrap();
        for i in 0..2 {
            assert!((analytic_stack_field(&s, i, 5.0).unwrap() - 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn splitting_a_layer_changes_nothing() {
        let s = design_stack(&presets::NIR_I, &Permittivities::gaas()).unwrap();
        let mut split = s.layers.clone();
        let hsq = split.pop().unwrap();
        split.push(Layer { thickness: 0.3 * hsq.thickness, ..hsq });
        split.push(Layer { thickness: 0.7 * hsq.thickness, ..hsq });
        let split = LayerStack::new(split).unwrap();
        let a = analytic_stack_field(&s, 1, 10.0).unwrap();
        let b = analytic_stack_field(&split, 1, 10.0).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn nir_reference_stack() {
        let s = design_stack(&presets::NIR_I, &Permittivities::gaas()).unwrap();
        let series = 136.0 / 3.9 + 261.0 / 12.9 + 441.0 / 3.0;
        let expected = 10.0 / (12.9 * series) * 1e4;
        let e = analytic_stack_field(&s, 1, 10.0).unwrap();
        assert!((e - expected).abs() < 1e-12 * expected);
        assert!((e - 38.36).abs() < 0.01);
        assert!((analytic_stack_field(&s, 1, 20.0).unwrap() - 2.0 * e).abs() < 1e-12 * e);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(LayerStack::new(vec![]).is_err());
        assert!(LayerStack::new(vec![Layer { thickness: 1.0, eps_r: 0.5 }]).is_err());
        let s = LayerStack { layers: vec![] };
        assert!(analytic_stack_field(&s, 0, 1.0).is_err());
    }
}
