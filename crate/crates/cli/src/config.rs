//! Run configuration: parsing, defaults, validation and hashing.

use std::path::{Path, PathBuf};

use rdopt::design::presets;
use rdopt::device::{GridSpec, Permittivities, SolverOptions, ToyConfig};
use rdopt::objective::ObjectiveSpec;
use rdopt::sampling::{default_mean_bounds_sigma, default_training_scales, BoxDomain, ToleranceSpec};
use rdopt::{DesignPoint, DESIGN_DIM, PARAMETER_NAMES};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required; there is no clock-based default.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Nominal design around which surrogates are trained.
    #[serde(default = "nir_center")]
    pub center: DesignPoint,
    #[serde(default = "ToleranceSpec::fabrication_default")]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub capacitor: CapacitorConfig,
    #[serde(default)]
    pub toy_eval: ToyEvalConfig,
}

fn nir_center() -> DesignPoint {
    presets::NIR_I
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleConfig {
    Toy {
        #[serde(default)]
        params: ToyConfig,
    },
    /// Lookup-only replay of precomputed evaluations.
    Table { path: PathBuf },
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig::Toy { params: ToyConfig::default() }
    }
}

/// A parameter range in the optimization domain: fixed value or interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Range {
    Fixed(f64),
    Interval([f64; 2]),
}

/// Optimization box. The planarization may be given as total `t_HSQ` or as
/// the cap above the grating, `t_HSQ_minus_t_CBG`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptDomain {
    #[serde(rename = "R")]
    pub r: Range,
    #[serde(rename = "W")]
    pub w: Range,
    #[serde(rename = "P")]
    pub p: Range,
    #[serde(rename = "t_CBG")]
    pub t_cbg: Range,
    #[serde(rename = "t_SiO2")]
    pub t_sio2: Range,
    #[serde(rename = "t_HSQ", default, skip_serializing_if = "Option::is_none")]
    pub t_hsq: Option<Range>,
    #[serde(rename = "t_HSQ_minus_t_CBG", default, skip_serializing_if = "Option::is_none")]
    pub t_cap: Option<Range>,
    #[serde(rename = "t_ITO")]
    pub t_ito: Range,
}

impl Default for OptDomain {
    /// NIR column of the published optimization domains.
    fn default() -> Self {
        Self {
            r: Range::Interval([150.0, 250.0]),
            w: Range::Interval([100.0, 200.0]),
            p: Range::Interval([300.0, 400.0]),
            t_cbg: Range::Interval([150.0, 300.0]),
            t_sio2: Range::Interval([100.0, 300.0]),
            t_hsq: None,
            t_cap: Some(Range::Interval([50.0, 900.0])),
            t_ito: Range::Fixed(50.0),
        }
    }
}

/// Maps optimizer coordinates (free parameters only) to designs.
#[derive(Clone, Debug)]
pub struct SearchSpace {
    ranges: [Range; DESIGN_DIM],
    cap_relative: bool,
    pub domain: BoxDomain,
}

impl SearchSpace {
    pub fn design(&self, x: &[f64]) -> DesignPoint {
        let mut it = x.iter();
        let mut v = [0.0; DESIGN_DIM];
        for (vi, r) in v.iter_mut().zip(&self.ranges) {
            *vi = match r {
                Range::Fixed(f) => *f,
                Range::Interval(_) => *it.next().expect("one coordinate per free parameter"),
            };
        }
        if self.cap_relative {
            v[5] += v[3];
        }
        DesignPoint::from_array(v)
    }
}

impl OptDomain {
    pub fn search_space(&self) -> Result<SearchSpace, CliError> {
        let (hsq, cap_relative) = match (self.t_hsq, self.t_cap) {
            (Some(h), None) => (h, false),
            (None, Some(c)) => (c, true),
            _ => return Err(CliError::Config("give exactly one of t_HSQ and t_HSQ_minus_t_CBG".into())),
        };
        let ranges = [self.r, self.w, self.p, self.t_cbg, self.t_sio2, hsq, self.t_ito];
        let (mut lower, mut upper, mut names) = (Vec::new(), Vec::new(), Vec::new());
        for (i, r) in ranges.iter().enumerate() {
            let name = if i == 5 && cap_relative { "t_HSQ_minus_t_CBG" } else { PARAMETER_NAMES[i] };
            match *r {
                Range::Fixed(f) if f.is_finite() && f > 0.0 => {}
                Range::Interval([a, b]) if a.is_finite() && b.is_finite() && 0.0 < a && a < b => {
                    lower.push(a);
                    upper.push(b);
                    names.push(name.to_string());
                }
                _ => return Err(CliError::Config(format!("invalid range for {name}: {r:?}"))),
            }
        }
        if lower.is_empty() {
            return Err(CliError::Config("optimization domain has no free parameter".into()));
        }
        let domain = BoxDomain::new(lower, upper, names).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(SearchSpace { ranges, cap_relative, domain })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub domain: OptDomain,
    pub budget: usize,
    pub init_count: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { domain: OptDomain::default(), budget: 300, init_count: 32 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Sobol training points; a power of two.
    pub count: usize,
    /// Half-widths of the training box in standard deviations.
    pub scales: DesignPoint,
    /// Previously written `surrogate.bin` to load instead of training.
    pub surrogate: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { count: 1024, scales: DesignPoint::from_array(default_training_scales()), surrogate: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub samples: usize,
    /// Distribution mean; defaults to `center`.
    pub mean: Option<DesignPoint>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { samples: rdopt::robustness::DEFAULT_ANALYSIS_SAMPLES, mean: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustConfig {
    pub samples: usize,
    pub budget: usize,
    pub init_count: usize,
    /// Half-widths of the search box for the mean, in standard deviations.
    pub mu_bounds_sigma: DesignPoint,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            samples: rdopt::robustness::DEFAULT_ROBUST_SAMPLES,
            budget: 100,
            init_count: 32,
            mu_bounds_sigma: DesignPoint::from_array(default_mean_bounds_sigma()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub count: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { count: rdopt::robustness::DEFAULT_VERIFY_COUNT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlabMaterial {
    Gaas,
    Inp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitorConfig {
    /// Geometry; defaults to `center`.
    pub design: Option<DesignPoint>,
    pub material: SlabMaterial,
    /// Overrides `material` when given.
    pub permittivities: Option<Permittivities>,
    pub voltages: Vec<f64>,
    pub grid: GridSpec,
    pub solver: SolverOptions,
    /// Every n-th node is written to the field map.
    pub field_map_stride: usize,
    /// Field map extent, nm.
    pub field_map_radius: f64,
}

impl Default for CapacitorConfig {
    fn default() -> Self {
        Self {
            design: None,
            material: SlabMaterial::Gaas,
            permittivities: None,
            voltages: (0..=40).map(f64::from).collect(),
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
            field_map_stride: 2,
            field_map_radius: 2000.0,
        }
    }
}

impl CapacitorConfig {
    pub fn permittivities(&self) -> Permittivities {
        self.permittivities.unwrap_or(match self.material {
            SlabMaterial::Gaas => Permittivities::gaas(),
            SlabMaterial::Inp => Permittivities::inp(),
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyEvalConfig {
    /// Designs to evaluate; defaults to `center`.
    pub points: Vec<DesignPoint>,
}

impl RunConfig {
    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let OracleConfig::Table { path } = &mut cfg.oracle {
            resolve(path);
        }
        if let Some(p) = &mut cfg.training.surrogate {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn analysis_mean(&self) -> DesignPoint {
        self.analysis.mean.unwrap_or(self.center)
    }

    /// Checks everything that does not need computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |m: String| CliError::Config(m);
        if self.seed.is_none() {
            return Err(cfg("seed is required (set it in the config or pass --seed)".into()));
        }
        self.center.validate().map_err(|e| cfg(format!("center: {e}")))?;
        self.objective.validate().map_err(|e| cfg(format!("objective: {e}")))?;
        if let OracleConfig::Toy { params } = &self.oracle {
            params.reference.validate().map_err(|e| cfg(format!("oracle reference: {e}")))?;
        }
        for p in self.referenced_files() {
            if !p.is_file() {
                return Err(cfg(format!("referenced file {} does not exist", p.display())));
            }
        }
        let t = &self.training;
        if t.count < 64 || !t.count.is_power_of_two() {
            return Err(cfg(format!("training.count must be a power of two of at least 64, got {}", t.count)));
        }
        if t.scales.to_array().iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(cfg("training.scales must be positive".into()));
        }
        if self.robust.mu_bounds_sigma.to_array().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(cfg("robust.mu_bounds_sigma must be non-negative".into()));
        }
        for (name, n) in [
            ("analysis.samples", self.analysis.samples),
            ("robust.samples", self.robust.samples),
            ("verify.count", self.verify.count),
        ] {
            if n < 2 {
                return Err(cfg(format!("{name} must be at least 2")));
            }
        }
        if let Some(m) = &self.analysis.mean {
            m.validate().map_err(|e| cfg(format!("analysis.mean: {e}")))?;
        }
        self.optimize.domain.search_space()?;
        let c = &self.capacitor;
        c.permittivities().validate().map_err(|e| cfg(format!("capacitor: {e}")))?;
        if c.voltages.is_empty() || c.voltages.iter().any(|u| !u.is_finite()) {
            return Err(cfg("capacitor.voltages must be a non-empty list of finite values".into()));
        }
        for p in &self.toy_eval.points {
            p.validate().map_err(|e| cfg(format!("toy_eval point: {e}")))?;
        }
        Ok(())
    }

    pub fn referenced_files(&self) -> Vec<&Path> {
        let mut v = Vec::new();
        if let OracleConfig::Table { path } = &self.oracle {
            v.push(path.as_path());
        }
        if let Some(p) = &self.training.surrogate {
            v.push(p.as_path());
        }
        v
    }

    /// SHA-256 of the canonical JSON form without the output directory, hex
    /// encoded.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { output_dir: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
