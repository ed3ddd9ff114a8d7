//! Spectral Green's function of a two-dimensional open slab waveguide,
//! with tools for weighted perturbation estimates.

pub mod error;
pub mod estimates;
pub mod field;
pub mod green;
pub mod modal;
pub mod par;
pub mod perturb;
pub mod profile;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use estimates::{estimate_report, EstimateReport, NormOrder, WeightSpec};
pub use field::{
    apply_green, apply_green_jet, helmholtz_residual, operator_residual, picard_solve, ComplexField, FieldJet, Grid2D,
};
pub use green::{
    build_evaluator, eval_evanescent, eval_full, eval_guided, eval_radiation, FieldPoint, GreenEvaluator, GreenParts,
};
pub use modal::{find_guided_modes, solve_transverse, spectral_density, GuidedMode, ModeFunction, Parity};
pub use perturb::{BumpFunction, MapSpec, PerturbationMap, RhsVariant};
pub use profile::{CoreIndex, WaveguideProfile};
