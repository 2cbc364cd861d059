pub mod collision;
pub mod dumbbell;
pub mod ensemble;
pub mod error;
pub mod forces;
pub mod fp;
pub mod geometry;
pub mod harness;
pub mod ou;
pub mod quadrature;
pub mod rod;
pub mod sph;

pub use error::{Error, Result};
