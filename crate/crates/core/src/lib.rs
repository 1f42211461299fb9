//! Smooth PARAFAC tensor completion.
//!
//! A low-rank polyadic model with TV or QV smoothness on its factor vectors
//! fills the missing entries of a partially observed tensor. The rank grows
//! one component at a time until the observed entries are fitted to a target
//! signal-to-distortion ratio.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the file formats and the CLI
//! use.

pub mod datagen;
pub mod error;
pub mod fr_spc;
pub mod io;
pub mod metrics;
pub mod scalar;
pub mod smoothness;
pub mod spc;
pub mod tensor;

pub use error::{Result, SpcError};
pub use fr_spc::{
    fr_spc_solve, fr_spc_sweep, local_gradient, local_objective, objective, sphere_update_step,
    update_component_vector, update_weight, Component, FactorModel, FrSpcConfig, FrSpcSolution,
    FrSpcState, FrSpcTrace, Smoothing, SphereOutcome, StepPolicy, SweepStats,
};
pub use metrics::EvalRegion;
pub use scalar::Scalar;
pub use smoothness::{sgn_vec, PenaltyKind, SmoothnessOperator};
pub use spc::{
    error_bound, spc_solve, spc_solve_simple, switching_check, IterationRecord, SimpleSolution,
    SpcConfig, SpcSolution, SpcTrace, SwitchComparison, Termination,
};
pub use tensor::{DenseTensor, Mask, Matrix, Region};

pub type Tensor = DenseTensor<f64>;
pub type Tensor32 = DenseTensor<f32>;
pub type Model = FactorModel<f64>;
pub type Model32 = FactorModel<f32>;
pub type FrConfig = FrSpcConfig<f64>;
pub type Config = SpcConfig<f64>;
pub type Solution = SpcSolution<f64>;
