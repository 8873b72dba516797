//! Discretization substrate: time grids, reproducible random streams,
//! Brownian increments and the unit-diffusion Euler–Maruyama integrator.

mod grid;
mod path;
mod rng;

pub use grid::{make_grid, Spacing, TimeGrid};
pub use path::{euler_maruyama, sample_brownian_increments, Increments, SamplePath};
pub use rng::{splitmix64, RandomStream};
pub(crate) use rng::purpose;
