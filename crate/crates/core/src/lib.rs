//! Weighted degenerate parabolic toolkit.
//!
//! Muckenhoupt weights, quasi-metric cylinder geometry, mean-oscillation
//! functionals, maximal functions and coverings, a conservative implicit
//! solver for `β(x) u_t - div(A ∇u) = div F`, functional-inequality audits
//! and boundary flattening.

pub mod error;
pub mod estimates;
pub mod field;
pub mod flattening;
pub mod geometry;
pub mod lab;
pub mod manufactured;
pub mod maximal;
pub mod oscillation;
pub mod quad;
pub mod report;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
pub use report::{AuditReport, AuditRow, Table};
