//! Deterministic sample generation: unscrambled Sobol points for surrogate
//! training and seeded multivariate-normal draws for tolerance analysis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{DesignPoint, DESIGN_DIM, PARAMETER_NAMES, PERIOD_INDEX};
use crate::error::{invalid, Error, Result};

const SOBOL_BITS: usize = 32;

/// Primitive polynomial degree, coefficient bits and initial direction
/// numbers (Joe & Kuo, `new-joe-kuo-6.21201`) for dimensions 2..=21.
/// Dimension 1 is the van der Corput sequence.
const JOE_KUO: [(u32, u32, &[u32]); 20] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

/// Largest dimension the direction-number table supports.
pub const MAX_SOBOL_DIM: usize = JOE_KUO.len() + 1;

/// Unscrambled Sobol sequence in Gray-code order.
///
/// Index 0 is the origin of the unit cube. [`sobol`] skips it.
#[derive(Clone, Debug)]
pub struct SobolSequence {
    directions: Vec<[u32; SOBOL_BITS]>,
}

impl SobolSequence {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("sobol dimension must be at least 1"));
        }
        if dim > MAX_SOBOL_DIM {
            return Err(Error::UnsupportedDimension { requested: dim, supported: MAX_SOBOL_DIM });
        }
        let directions = (0..dim).map(direction_numbers).collect();
        Ok(Self { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Point `index` of the sequence in `[0, 1)^dim`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        let gray = index ^ (index >> 1);
        let scale = 1.0 / (1u64 << SOBOL_BITS) as f64;
        self.directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                let mut g = gray;
                let mut bit = 0;
                while g != 0 && bit < SOBOL_BITS {
                    if g & 1 == 1 {
                        x ^= v[bit];
                    }
                    g >>= 1;
                    bit += 1;
                }
                x as f64 * scale
            })
            .collect()
    }

    /// `count` consecutive points starting at `start`.
    pub fn points(&self, start: u64, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64).map(|i| self.point(start + i)).collect()
    }
}

fn direction_numbers(dim_index: usize) -> [u32; SOBOL_BITS] {
    let mut v = [0u32; SOBOL_BITS];
    if dim_index == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (SOBOL_BITS - 1 - i);
        }
        return v;
    }
    let (s, a, init) = JOE_KUO[dim_index - 1];
    let s = s as usize;
    let mut m: Vec<u64> = init.iter().map(|&x| x as u64).collect();
    for i in s..SOBOL_BITS {
        let mut next = m[i - s] ^ (m[i - s] << s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                next ^= m[i - k] << k;
            }
        }
        m.push(next);
    }
    for (i, vi) in v.iter_mut().enumerate() {
        *vi = (m[i] << (SOBOL_BITS - 1 - i)) as u32;
    }
    v
}

/// Axis-aligned box in parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub names: Vec<String>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != names.len() || lower.is_empty() {
            return Err(invalid("box bounds and names must have equal, non-zero length"));
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(invalid(format!(
                    "box bounds for {} are not ordered: [{}, {}]",
                    names[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper, names })
    }

    /// Box with generated names `x0, x1, ...`.
    pub fn unnamed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let names = (0..lower.len()).map(|i| format!("x{i}")).collect();
        Self::new(lower, upper, names)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().enumerate().all(|(i, &x)| x >= self.lower[i] && x <= self.upper[i])
    }

    /// Maps a unit-cube point into the box.
    pub fn scale_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| self.lower[i] + t * self.width(i))
            .collect()
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (i, x) in p.iter_mut().enumerate() {
            *x = x.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Per-parameter fabrication standard deviations (nm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignPoint", into = "DesignPoint")]
pub struct ToleranceSpec {
    pub sigma: [f64; DESIGN_DIM],
}

impl ToleranceSpec {
    pub fn new(sigma: [f64; DESIGN_DIM]) -> Result<Self> {
        for (name, s) in PARAMETER_NAMES.iter().zip(sigma) {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid(format!("tolerance for {name} must be positive, got {s}")));
            }
        }
        Ok(Self { sigma })
    }

    /// Assumed fabrication accuracies: 10, 10, 1, 5, 10, 10, 5 nm.
    pub fn fabrication_default() -> Self {
        Self { sigma: [10.0, 10.0, 1.0, 5.0, 10.0, 10.0, 5.0] }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.sigma.map(|s| s * factor))
    }
}

impl TryFrom<DesignPoint> for ToleranceSpec {
    type Error = Error;

    fn try_from(p: DesignPoint) -> Result<Self> {
        Self::new(p.to_array())
    }
}

impl From<ToleranceSpec> for DesignPoint {
    fn from(t: ToleranceSpec) -> Self {
        DesignPoint::from_array(t.sigma)
    }
}

/// `count` Sobol points scaled into `domain`, starting at sequence index 1.
pub fn sobol(dim: usize, count: usize, domain: &BoxDomain) -> Result<Vec<Vec<f64>>> {
    sobol_from(dim, count, domain, 1)
}

/// Like [`sobol`] but starting at an arbitrary sequence index.
pub fn sobol_from(dim: usize, count: usize, domain: &BoxDomain, start: u64) -> Result<Vec<Vec<f64>>> {
    if dim != domain.dim() {
        return Err(invalid(format!(
            "sobol dimension {dim} does not match the {}-dimensional domain",
            domain.dim()
        )));
    }
    if count == 0 {
        return Err(invalid("sobol count must be at least 1"));
    }
    let seq = SobolSequence::new(dim)?;
    Ok((0..count as u64).map(|i| domain.scale_unit(&seq.point(start + i))).collect())
}

/// Default half-widths of the training box, in standard deviations.
pub fn default_training_scales() -> [f64; DESIGN_DIM] {
    let mut s = [5.0; DESIGN_DIM];
    s[PERIOD_INDEX] = 25.0;
    s
}

/// Default half-widths of the robust-optimization box for the mean, in
/// standard deviations.
pub fn default_mean_bounds_sigma() -> [f64; DESIGN_DIM] {
    let mut s = [2.0; DESIGN_DIM];
    s[PERIOD_INDEX] = 22.0;
    s
}

/// Box `center ± scale·Δ` over the seven design parameters.
pub fn training_domain(
    center: &DesignPoint,
    tol: &ToleranceSpec,
    scale: &[f64; DESIGN_DIM],
) -> Result<BoxDomain> {
    let c = center.to_array();
    let mut lower = Vec::with_capacity(DESIGN_DIM);
    let mut upper = Vec::with_capacity(DESIGN_DIM);
    for i in 0..DESIGN_DIM {
        if !(scale[i] > 0.0 && scale[i].is_finite()) {
            return Err(invalid(format!(
                "scale for {} must be positive, got {}",
                PARAMETER_NAMES[i], scale[i]
            )));
        }
        lower.push(c[i] - scale[i] * tol.sigma[i]);
        upper.push(c[i] + scale[i] * tol.sigma[i]);
    }
    BoxDomain::new(lower, upper, PARAMETER_NAMES.iter().map(|s| s.to_string()).collect())
}

/// Standard-normal vector for sample `index` of stream `seed`.
///
/// Each sample owns its own ChaCha stream, so any subset of indices can be
/// generated independently and in any order.
pub fn standard_normal_sample(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `count` independent standard-normal vectors.
pub fn standard_normal_block(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count as u64).map(|i| standard_normal_sample(seed, i, dim)).collect()
}

/// Draws from `N(mean, diag(sigma²))` over raw vectors.
pub fn mvn_sample_vec(mean: &[f64], sigma: &[f64], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if mean.len() != sigma.len() {
        return Err(invalid("mean and sigma lengths differ"));
    }
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    Ok(standard_normal_block(seed, count, mean.len())
        .into_iter()
        .map(|z| z.iter().enumerate().map(|(i, zi)| mean[i] + sigma[i] * zi).collect())
        .collect())
}

/// Draws from the manufacturing distribution around `mean`.
pub fn mvn_sample(
    mean: &DesignPoint,
    tol: &ToleranceSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<DesignPoint>> {
    Ok(mvn_sample_vec(&mean.to_array(), &tol.sigma, count, seed)?
        .into_iter()
        .map(|v| DesignPoint::from_slice(&v).expect("seven coordinates"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::presets;

    fn unit(dim: usize) -> BoxDomain {
        BoxDomain::unnamed(vec![0.0; dim], vec![1.0; dim]).unwrap()
    }

    #[test]
    fn first_points_match_reference_table() {
        let pts = sobol(7, 5, &unit(7)).unwrap();
        let expected = [
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25],
            [0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75],
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875],
        ];
        for (p, e) in pts.iter().zip(expected) {
            assert_eq!(p.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn one_dimensional_dyadic_balance() {
        let seq = SobolSequence::new(1).unwrap();
        for k in 1..12 {
            let n = 1usize << k;
            let raw = seq.points(0, n);
            assert_eq!(raw.iter().filter(|p| p[0] < 0.5).count(), n / 2, "k={k}");
        }
        // Skipping the origin swaps it for point n, which lies below 0.5 once n >= 4.
        for k in 2..12 {
            let n = 1usize << k;
            let pts = sobol(1, n, &unit(1)).unwrap();
            assert_eq!(pts.iter().filter(|p| p[0] < 0.5).count(), n / 2, "k={k}");
        }
    }

    #[test]
    fn points_stay_inside_box() {
        let d = BoxDomain::unnamed(vec![-3.0, 10.0, 0.5], vec![-1.0, 20.0, 0.6]).unwrap();
        for p in sobol(3, 1000, &d).unwrap() {
            assert!(d.contains(&p));
        }
    }

    #[test]
    fn too_many_dimensions_is_rejected() {
        let d = unit(MAX_SOBOL_DIM + 1);
        assert!(matches!(
            sobol(MAX_SOBOL_DIM + 1, 4, &d),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(sobol(3, 4, &unit(4)).is_err());
        assert!(sobol(4, 0, &unit(4)).is_err());
    }

    #[test]
    fn points_are_distinct() {
        let seq = SobolSequence::new(2).unwrap();
        let mut pts: Vec<(u64, u64)> = (1..(1u64 << 16))
            .map(|i| {
                let p = seq.point(i);
                (p[0].to_bits(), p[1].to_bits())
            })
            .collect();
        pts.sort_unstable();
        pts.dedup();
        assert_eq!(pts.len(), (1 << 16) - 1);
    }

    #[test]
    fn training_domain_matches_published_boxes() {
        let tol = ToleranceSpec::fabrication_default();
        let d = training_domain(&presets::NIR_I, &tol, &default_training_scales()).unwrap();
        assert_eq!((d.lower[0], d.upper[0]), (151.0, 251.0));
        assert_eq!((d.lower[2], d.upper[2]), (293.0, 343.0));
        let mut bad = default_training_scales();
        bad[3] = 0.0;
        assert!(training_domain(&presets::NIR_I, &tol, &bad).is_err());
    }

    #[test]
    fn tiny_tolerance_concentrates_samples() {
        let tol = ToleranceSpec::new([1e-9; DESIGN_DIM]).unwrap();
        let c = presets::NIR_I.to_array();
        for s in mvn_sample(&presets::NIR_I, &tol, 1000, 3).unwrap() {
            for (a, b) in s.to_array().iter().zip(c) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn seeds_change_the_stream() {
        let tol = ToleranceSpec::fabrication_default();
        let a = mvn_sample(&presets::NIR_I, &tol, 1, 1).unwrap();
        let b = mvn_sample(&presets::NIR_I, &tol, 1, 2).unwrap();
        assert_ne!(a[0], b[0]);
        let again = mvn_sample(&presets::NIR_I, &tol, 1, 1).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn sample_subsets_are_order_independent() {
        let full = standard_normal_block(11, 50, 3);
        for i in [0u64, 17, 49] {
            assert_eq!(standard_normal_sample(11, i, 3), full[i as usize]);
        }
    }

    #[test]
    fn tolerance_serde_uses_parameter_names() {
        let t = ToleranceSpec::fabrication_default();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"P\":1.0"));
        let back: ToleranceSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let bad = json.replace("\"P\":1.0", "\"P\":0.0");
        assert!(serde_json::from_str::<ToleranceSpec>(&bad).is_err());
    }
}
