//! Numerical laboratory for variable-exponent Caccioppoli and Hardy-type
//! inequalities on one-dimensional domains.

pub mod error;
pub mod expr;
pub mod instance;
pub mod interval;
pub mod measure;
pub mod quadrature;
pub mod report;
pub mod sharpness;
pub mod spaces;
pub mod testfn;
pub mod verify;

pub use error::*;
pub use expr::{parse, parse_with, Bindings, Expr};
pub use interval::Interval;
