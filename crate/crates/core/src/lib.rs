//! Cooling of a nanomechanical resonator coupled to a single Morse molecule
//! through a driven microwave cavity.

pub mod config;
pub mod covariance;
pub mod error;
pub mod linear;
pub mod morse;
pub mod params;
pub mod quadrature;
pub mod response;
pub mod run;
pub mod sde;
pub mod stability;
pub mod steadystate;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};
