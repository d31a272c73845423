//! Secure state reconstruction (SSR) for discrete-time LTI systems whose
//! sensors may be under attack.
//!
//! The crate splits the problem along the generalized eigenspaces of the
//! plant matrix: [`spectral`] computes the direct-sum structure,
//! [`decompose`] builds the per-eigenvalue subproblems, [`observability`]
//! classifies each one, and [`solvers`] reconstructs the state with majority
//! voting where that is enough and brute-force search elsewhere.
//! [`reductions`] contains the two hardness reductions as checkable instance
//! generators.

pub mod decompose;
pub mod error;
pub mod exact;
pub mod generate;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod observability;
pub mod reductions;
pub mod search;
pub mod simulate;
pub mod solvers;
pub mod spectral;

pub use error::{Result, SsrError};
pub use model::{
    observability_matrix, validate_system, HorizonPolicy, LtiSystem, MeasurementBundle,
    ObservabilityMatrix, SensorDef, Tolerances,
};
pub use search::SearchConfig;

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
/// Complex scalar.
pub type Complex = nalgebra::Complex<f64>;
