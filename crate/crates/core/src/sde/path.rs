use rand_distr::{Distribution, StandardNormal};

use super::grid::TimeGrid;
use super::rng::RandomStream;
use crate::error::{Error, Result};

/// A discretized trajectory in `R^dim`, one state per grid point, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("path dimension must be positive".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::DimensionMismatch { expected: grid.len() * dim, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sample path contains non-finite values".into()));
        }
        Ok(SamplePath { grid, dim, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.len() - 1)
    }

    /// `Y[i+1] - Y[i]` written into `out`.
    pub fn increment(&self, i: usize, out: &mut [f64]) {
        let (a, b) = (self.at(i), self.at(i + 1));
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = y - x;
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw little-endian bytes of the values, for bit-exact comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn subsample(&self, stride: usize) -> Result<SamplePath> {
        let grid = self.grid.subsample(stride)?;
        let values = (0..self.len())
            .step_by(stride)
            .flat_map(|i| self.at(i).iter().copied())
            .collect();
        Ok(SamplePath { grid, dim: self.dim, values })
    }
}

/// Driving-noise increments for one path: `steps x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    dim: usize,
    data: Vec<f64>,
}

impl Increments {
    pub fn zeros(grid: &TimeGrid, dim: usize) -> Self {
        Increments { dim, data: vec![0.0; grid.steps() * dim] }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: data.len() });
        }
        Ok(Increments { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Independent `N(0, dt_i I)` increments for every step of `grid`.
pub fn sample_brownian_increments(grid: &TimeGrid, dim: usize, stream: RandomStream) -> Increments {
    let mut rng = stream.rng();
    let mut data = Vec::with_capacity(grid.steps() * dim);
    for dt in grid.dts() {
        let s = dt.sqrt();
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(s * z);
        }
    }
    Increments { dim, data }
}

/// Unit-diffusion Euler–Maruyama:
/// `x[i+1] = x[i] + drift(x[i], t[i]) dt[i] + dW[i]`.
///
/// The drift is evaluated at the left endpoint of every step (Itô
/// convention); every stochastic sum in this crate follows the same rule.
pub fn euler_maruyama<F>(mut drift: F, x0: &[f64], grid: &TimeGrid, increments: &Increments) -> Result<SamplePath>
where
    F: FnMut(&[f64], f64, &mut [f64]),
{
    let dim = x0.len();
    if increments.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: increments.dim() });
    }
    if increments.steps() != grid.steps() {
        return Err(Error::DimensionMismatch { expected: grid.steps(), got: increments.steps() });
    }
    let mut values = Vec::with_capacity(grid.len() * dim);
    values.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut a = vec![0.0; dim];
    for i in 0..grid.steps() {
        let t = grid.t(i);
        drift(&x, t, &mut a);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDrift { t, state: x });
        }
        let dt = grid.dt(i);
        for ((xj, aj), dw) in x.iter_mut().zip(&a).zip(increments.step(i)) {
            *xj += aj * dt + dw;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDrift { t, state: x });
        }
        values.extend_from_slice(&x);
    }
    Ok(SamplePath { grid: grid.clone(), dim, values })
}
