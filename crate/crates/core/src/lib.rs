//! Surrogate-assisted robust design optimization.

pub mod bayesopt;
pub mod design;
pub mod device;
pub mod error;
pub mod gp;
pub mod model_file;
pub mod objective;
pub mod robustness;
pub(crate) mod optim;
pub mod sampling;
pub mod stats;
pub mod warp;

pub use design::{DesignPoint, DESIGN_DIM, PARAMETER_NAMES};
pub use error::{Error, Result};
