//! Matrix-free Monte Carlo estimation of determinants.
//!
//! For a full-rank `A ∈ ℝⁿˣⁿ` the library estimates `|det A|⁻¹` (or `|det A|`
//! through solves with `A`) from matrix-vector products alone:
//!
//! * [`estimators::inv_det_sphere`] averages `‖A s‖⁻ⁿ` over `s` uniform on the
//!   unit sphere.
//! * [`estimators::det_via_inverse_solves`] averages `‖A⁻¹ s‖⁻ⁿ`, which is an
//!   unbiased estimate of `|det A|`.
//! * [`estimators::inv_det_gaussian_ratio`] averages `N(Ax)/N(x)` over standard
//!   Gaussian `x`.
//! * [`estimators::inv_det_importance`] averages `p(Ax)/q(x)` over `x ~ q` for a
//!   user supplied pair of densities.
//!
//! All weights are accumulated in the log domain, so estimates stay finite long
//! after `exp` of them would overflow. [`linalg::LuFactorization`] provides the
//! exact reference value used by the tests and the CLI.

pub mod cli;
pub mod ensembles;
mod error;
pub mod estimators;
pub mod linalg;
pub mod sampling;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use estimators::{
    det_via_inverse_solves, inv_det_gaussian_ratio, inv_det_importance, inv_det_sphere,
    EstimateResult, EstimatorConfig, LinearOperator, OperatorKind, Target,
};
pub use linalg::{lu_factorize, DenseMatrix, LuFactorization};
pub use sampling::{RngStream, UnitVector};
pub use stats::StreamingAccumulator;
