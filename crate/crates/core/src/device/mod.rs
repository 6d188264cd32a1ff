//! Device models: a synthetic cavity oracle and the electrostatics of the
//! contacted grating capacitor.

pub mod capacitor;
pub mod fd;
pub mod toy;

pub use capacitor::{analytic_stack_field, design_stack, Layer, LayerStack, Permittivities};
pub use fd::{bias_sweep, fd_axisym_solve, BiasSweep, FieldSolution, GridSpec, SolverOptions};
pub use toy::{toy_cavity, ToyConfig, ToyOutput};
