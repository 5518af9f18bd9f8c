//! Hessian discretisation methods for fourth-order elliptic control problems.
//!
//! The crate solves distributed optimal control of the clamped biharmonic
//! equation with box constraints on the control, using three discretisations
//! expressed in a common gradient-discretisation-style framework: a finite
//! volume scheme on orthogonality-adapted meshes, the Adini nonconforming
//! rectangle element, and a gradient-recovery method on triangles.

pub mod error;
pub mod jet;
pub mod sparse;
pub mod mesh;
pub mod exact;
pub mod ocp;
pub mod quadrature;
pub mod hd;
pub mod schemes;
pub mod analysis;
pub mod bench;

pub use error::{HessdiscError, Result};
