//! Device geometry vector shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of geometry parameters describing one device.
pub const DESIGN_DIM: usize = 7;

/// Parameter labels in storage order. These are also the CSV column names.
pub const PARAMETER_NAMES: [&str; DESIGN_DIM] =
    ["R", "W", "P", "t_CBG", "t_SiO2", "t_HSQ", "t_ITO"];

/// Index of the grating period in [`DesignPoint::to_array`] order.
pub const PERIOD_INDEX: usize = 2;

/// One candidate device. All lengths in nanometres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Radius of the central disc.
    #[serde(rename = "R")]
    pub r: f64,
    /// Width of the etched gaps.
    #[serde(rename = "W")]
    pub w: f64,
    /// Grating period.
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "t_CBG")]
    pub t_cbg: f64,
    #[serde(rename = "t_SiO2")]
    pub t_sio2: f64,
    /// Total planarization thickness above the oxide; covers the grating.
    #[serde(rename = "t_HSQ")]
    pub t_hsq: f64,
    #[serde(rename = "t_ITO")]
    pub t_ito: f64,
}

impl DesignPoint {
    pub fn from_array(v: [f64; DESIGN_DIM]) -> Self {
        Self {
            r: v[0],
            w: v[1],
            p: v[2],
            t_cbg: v[3],
            t_sio2: v[4],
            t_hsq: v[5],
            t_ito: v[6],
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; DESIGN_DIM] = v.try_into().map_err(|_| {
            invalid(format!("design vector has {} entries, expected {DESIGN_DIM}", v.len()))
        })?;
        Ok(Self::from_array(arr))
    }

    pub fn to_array(&self) -> [f64; DESIGN_DIM] {
        [self.r, self.w, self.p, self.t_cbg, self.t_sio2, self.t_hsq, self.t_ito]
    }

    /// Checks positivity, `t_HSQ >= t_CBG` and `W < P`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAMETER_NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.t_hsq < self.t_cbg {
            return Err(invalid(format!(
                "t_HSQ ({}) must not be smaller than t_CBG ({})",
                self.t_hsq, self.t_cbg
            )));
        }
        if self.w >= self.p {
            return Err(invalid(format!("W ({}) must be smaller than P ({})", self.w, self.p)));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

/// Published reference geometries (nm).
pub mod presets {
    use super::DesignPoint;

    pub const NIR_I: DesignPoint = DesignPoint {
        r: 201.0,
        w: 114.0,
        p: 318.0,
        t_cbg: 261.0,
        t_sio2: 136.0,
        t_hsq: 702.0,
        t_ito: 50.0,
    };
    pub const OB_I: DesignPoint = DesignPoint {
        r: 309.0,
        w: 160.0,
        p: 482.0,
        t_cbg: 272.0,
        t_sio2: 310.0,
        t_hsq: 947.0,
        t_ito: 50.0,
    };
    pub const CB_I: DesignPoint = DesignPoint {
        r: 410.0,
        w: 133.0,
        p: 593.0,
        t_cbg: 302.0,
        t_sio2: 388.0,
        t_hsq: 768.0,
        t_ito: 50.0,
    };
    pub const NIR_II: DesignPoint = DesignPoint {
        r: 209.0,
        w: 78.0,
        p: 309.0,
        t_cbg: 229.0,
        t_sio2: 135.0,
        t_hsq: 540.0,
        t_ito: 64.0,
    };
    pub const OB_II: DesignPoint = DesignPoint {
        r: 328.0,
        w: 102.0,
        p: 470.0,
        t_cbg: 239.0,
        t_sio2: 345.0,
        t_hsq: 499.0,
        t_ito: 57.0,
    };
    pub const CB_II: DesignPoint = DesignPoint {
        r: 418.0,
        w: 110.0,
        p: 594.0,
        t_cbg: 287.0,
        t_sio2: 418.0,
        t_hsq: 759.0,
        t_ito: 57.0,
    };
}
