//! Equilibrium analysis for the EV charging game.
//!
//! The discrete game ([`model`]) has players choosing which of `T` periods to
//! plug in, paying a two-slab price for the energy they receive and a
//! dissatisfaction cost whenever a period is congested. On top of it sit
//! best-response and Nash enumeration ([`equilibrium`]), herding thresholds
//! ([`herding`]) and price-region synthesis ([`pricing`]). The continuous
//! symmetric variant and its coarse correlated equilibrium analysis live in
//! [`cevgame`].

pub mod cevgame;
pub mod equilibrium;
mod error;
pub mod geometry;
pub mod herding;
pub mod model;
pub mod pricing;
pub mod roots;

pub use error::{Error, Result};
