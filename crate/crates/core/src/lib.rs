//! Numerical laboratory for two-component coupled nonlinear Schrödinger systems
//! with power nonlinearity on periodic boxes in one to three dimensions.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod minimize;
pub mod parallel;
pub mod params;
pub mod profiles;
pub mod snapshot;
pub mod stability;

pub use error::{Error, Result};
pub use field::{FieldPair, C64};
pub use functionals::FunctionalReport;
pub use grid::Grid;
pub use params::{Criticality, SystemParams};
