//! Numerical verification engine for almost contact B-metric geometry.
//!
//! Structures are described by component functions on a single chart and
//! evaluated on third-order jets, so connection, curvature and the covariant
//! derivative of curvature are exact to machine precision.

pub mod curvature;
pub mod error;
pub mod example;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod soliton;
pub mod structure;
pub mod suite;
pub mod table;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{evaluate_jet, ScalarField, TensorField};
pub use jet::{Jet3, JetError};
pub use structure::ManifoldSpec;
pub use tensor::{Direction, JetTensor, Point, TensorComponents, Valence};
