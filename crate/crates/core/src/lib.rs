//! Spectral laboratory for warped-product Riemannian submersions over
//! rotationally symmetric bases.

pub mod bounds;
pub mod certificate;
pub mod comparison;
pub mod identities;
pub mod models;
pub mod nonfinite;
pub mod profiles;
pub mod spectrum;
pub mod sturm_liouville;
pub mod tone;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
