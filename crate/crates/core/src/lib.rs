//! Smooth self-similar supersonic implosion profiles of the non-isentropic
//! Euler-Poisson system: scaling algebra, sonic-origin Taylor expansion,
//! outward ODE continuation, invariant monitoring and physical-space
//! reconstruction.

pub mod error;
pub mod monitor;
pub mod params;
pub mod physical;
pub mod profile;
pub mod series;

pub use error::{Error, Result};
pub use params::Params;
