//! Discrete Cosserat kinematics on uniform 3-D grids: stretch and curvature
//! measures, the compatibility condition for a prescribed stretch field,
//! reconstruction of deformation and microrotation, and a discrete
//! geometrically nonlinear Cosserat energy with a gradient-descent minimizer.

pub mod cases;
pub mod compatibility;
pub mod convergence;
pub mod curvature;
pub mod energy;
pub mod error;
pub mod field;
pub mod identities;
pub mod random;
pub mod reconstruction;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{AnyField, FieldKind, Grid3, GridField};
pub use tensor::{Mat3, Rot3, SkewMat3, Tensor3, Vec3};
