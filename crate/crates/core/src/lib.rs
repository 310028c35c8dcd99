//! Spectral solver for `∂_t y + L^s y = f` with exact s-derivatives, and an
//! optimizer for the fractional order `s` minimizing tracking misfit plus
//! penalty.

pub mod basis;
pub mod config;
pub mod error;
pub mod kernel;
pub mod numerics;
pub mod objective;
pub mod optimize;
pub mod run;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
