//! Hierarchical marginal log-linear models for multi-way contingency tables.

pub mod contrasts;
pub mod error;
pub mod estimation;
pub mod gee;
pub mod modelspec;
pub mod parameterization;
pub mod sampling;
pub mod table;

pub use contrasts::CodingKind;
pub use error::{MllError, Result};
pub use estimation::{Algorithm, FitOptions, FitResult};
pub use modelspec::{CiStatement, ModelSpec};
pub use parameterization::{ComponentLabel, InvertOptions, MarginalBlock, Parameterization};
pub use table::{Effect, MarginalSequence, Table, TableKind, VariableScheme};
