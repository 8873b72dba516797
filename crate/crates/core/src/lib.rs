//! Nonlinear-filtering laboratory for SDE-based generative models.

pub mod error;
pub mod filtering;
pub mod forking;
pub mod generative;
pub mod harness;
pub mod information;
mod mc;
pub mod models;
pub mod sde;

pub use error::{Error, Result};
