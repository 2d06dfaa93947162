//! Batalin-Vilkovisky calculus on finite-dimensional degree -1 symplectic
//! vector spaces: graded polynomial algebras with deformed BV Laplacians and
//! brackets, gl(1|1)-driven free renormalization-group flows and effective
//! actions, generic BV flow checkers, and a perturbative integrator for the
//! Polchinski-form RG equation.
//!
//! Every operation is generic over the scalar mode: exact rationals for
//! identity checking, 64-bit floats for flows requiring transcendental
//! functions. All values are immutable after construction and all operations
//! are pure functions; everything may be freely shared between threads.

#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod bv;
pub mod error;
pub mod gl11;
pub mod linear;
mod mat;
pub mod perturbation;
pub mod report;
pub mod sampling;
pub mod scalar;

pub use algebra::{FlowMap, GradedPoly, HbarSeries, Monomial};
pub use bv::{
    bracket, canonical_bracket, canonical_residual, conjugate_flow, flow_suite,
    hamiltonian_derivation, laplacian_cohomology_dims, mixed_bracket, qme_residual,
    quadratic_form, reconstruct_flow, CanonicalMapWitness, DeformedLaplacian, Derivation,
    FlowFamily, FlowSuiteTolerances, GeneratorData, LaplacianFamily, ProbeMode, SignConvention,
    SIGNS,
};
pub use error::{Error, Result};
pub use gl11::{FreeModel, Gl11Structure};
pub use linear::{
    graded_commutator, graded_trace, matrix_exp, Endomorphism, GradedBasis,
};
pub use report::CheckRecord;
pub use scalar::{Rat, Scalar};

/// Default polynomial degree truncation bound.
pub const DEFAULT_MAX_DEGREE: usize = 6;

/// Default truncation order of the loop-counting series.
pub const DEFAULT_HBAR_ORDER: usize = 4;

/// Default tolerances, by check class.
pub mod tol {
    /// Static identities in float mode.
    pub const STATIC_F64: f64 = 1e-9;
    /// Free-model master-equation residuals in float mode.
    pub const FREE_QME_F64: f64 = 1e-10;
    /// Flow-suite finite-difference checks at step 1e-4.
    pub const FLOW_FD: f64 = 1e-7;
    /// Integrated trajectories (|t-s| <= 1, 200 steps) in float mode.
    pub const TRAJECTORY_F64: f64 = 1e-6;
    /// Reconstruction against closed forms at 100 steps over |t-s| = 1.
    pub const RECONSTRUCT: f64 = 1e-8;
    /// Polchinski-projection residual at finite-difference step 1e-4.
    pub const POLCHINSKI: f64 = 1e-7;
    /// Full-action partner equation when the partner solve is exact.
    pub const PARTNER_FULL: f64 = 1e-8;
}
