//! Numerical differential geometry on coordinate charts, centered on the
//! correspondence between hypersurface data `(g, B)` in hyperbolic space and
//! its boundary data `(ĝ, B̂)`, together with the conformal-flatness machinery
//! needed to solve the boundary equations in closed form.
//!
//! Everything works pointwise on a single chart: fields produce truncated
//! Taylor jets, curvature and covariant derivatives are assembled from the
//! jet coefficients, and each identity of interest is exercised as a residual
//! over deterministic sample points.

pub use nalgebra;

pub mod dense;
pub mod duality;
pub mod hyperbolic;
pub mod jet;
pub mod jetcalc;
pub mod lcf;
pub mod multilinear;
pub mod report;
pub mod ringmat;
pub mod speccat;
pub mod suite;
pub mod transform;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (asymmetry {asym:.3e})")]
    NotSymmetric { asym: f64 },

    #[error("metric is not positive definite (smallest eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("curvature symmetry violation {defect:.3e} exceeds tolerance {tol:.1e}")]
    SymmetryViolation { defect: f64, tol: f64 },

    #[error("degenerate 2-plane for sectional curvature")]
    DegeneratePlane,

    #[error("{what} is singular or nearly singular")]
    Singular { what: &'static str },

    #[error("{op} requires dimension >= {required}, got {got}")]
    DimensionAtLeast {
        op: &'static str,
        required: usize,
        got: usize,
    },

    #[error("uniqueness fails in dimension 2: g owedge (.) has a kernel")]
    UniquenessDim2,

    #[error("dualization degenerates: eigenvalue of Id+B within {margin:.3e} of zero")]
    DualDegenerate { margin: f64 },

    #[error("invalid tangent data: {0}")]
    InvalidTangent(String),

    #[error("parse error at column {col}: {msg}")]
    Parse { col: usize, msg: String },

    #[error("domain violation evaluating expression: {0}")]
    Domain(String),

    #[error("invalid spec document: {0}")]
    Schema(String),

    #[error("constraint violated at sample point {point:?}: {msg}")]
    Constraint { point: Vec<f64>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
