//! The three concrete Hessian discretisations.

pub mod fvm;
pub mod adini;
pub mod gr;
