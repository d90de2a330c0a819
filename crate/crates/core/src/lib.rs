//! Exact Schrödinger simulation of a two-state particle coupled to an n-unit
//! population-inverted amplifier, with finite-n scaling of pointer statistics.

pub mod born;
pub mod check;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod macro_obs;
pub mod manifest;
pub mod mat2;
pub mod model;
pub mod output;
pub mod scaling;
pub mod state;

pub use error::{Error, Result};
