//! Two-pool mesh key pre-distribution built on a pair of projective-plane
//! designs, together with the classical designs it is compared against, the
//! closed-form metrics for all of them, and an enumeration / Monte Carlo engine
//! that checks those metrics independently.

pub mod analytics;
pub mod designs;
pub mod error;
pub mod field;
pub mod meshkps;
pub mod sim;

pub use error::{Error, Result};
