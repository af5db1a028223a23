//! Event-driven wave-front tracking for strictly hyperbolic systems whose
//! shock and rarefaction curves coincide, with a shift-differential
//! sensitivity calculus and experiment drivers.

pub mod error;
pub mod linalg;
pub mod models;
pub mod riemann;
pub mod tracker;
pub mod characteristics;
pub mod sensitivity;
pub mod lab;

pub use error::{Error, Result};
