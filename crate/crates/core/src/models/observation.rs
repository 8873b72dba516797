use std::fmt;
use std::sync::Arc;

use super::schedule::Schedule;
use crate::error::{Error, Result};

type ObservationFn = dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync;

/// User supplied observation function `H(y, v, t)` written into the output
/// slice. `Y_0` is taken to be the origin.
#[derive(Clone)]
pub struct CustomObservation {
    pub name: String,
    func: Arc<ObservationFn>,
}

impl CustomObservation {
    pub fn new<F>(name: &str, func: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        CustomObservation { name: name.to_string(), func: Arc::new(func) }
    }
}

impl fmt::Debug for CustomObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomObservation").field("name", &self.name).finish()
    }
}

/// The observation function `H(y, x, t)` that drives `dY = H dt + dW`.
/// The latent enters only through its rendering `v = g(x)`.
#[derive(Debug, Clone)]
pub enum ObservationModel {
    /// `H = m(t) v - f(t) y`, pinning `Y_T = V`.
    LinearBridge(Schedule),
    /// `H = v`, started from `Y_0 = 0`.
    Static,
    Custom(CustomObservation),
}

/// Law of `Y_0` given the rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Fixed(Vec<f64>),
    Gaussian { mean: Vec<f64>, std: f64 },
}

/// `H(., ., t)` with the time-dependent coefficients resolved once per step.
#[derive(Clone, Copy)]
pub enum StepObservation<'a> {
    /// `H = a v + b y`.
    Affine { a: f64, b: f64 },
    Custom { func: &'a ObservationFn, t: f64 },
}

impl StepObservation<'_> {
    #[inline]
    pub fn eval(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        match *self {
            StepObservation::Affine { a, b } => {
                for ((o, vi), yi) in out.iter_mut().zip(v).zip(y) {
                    *o = a * vi + b * yi;
                }
            }
            StepObservation::Custom { func, t } => func(y, v, t, out),
        }
    }
}

impl ObservationModel {
    pub fn schedule(&self) -> Option<&Schedule> {
        match self {
            ObservationModel::LinearBridge(s) => Some(s),
            _ => None,
        }
    }

    pub fn at(&self, t: f64) -> Result<StepObservation<'_>> {
        Ok(match self {
            ObservationModel::LinearBridge(s) => StepObservation::Affine { a: s.m(t)?, b: -s.f(t)? },
            ObservationModel::Static => StepObservation::Affine { a: 1.0, b: 0.0 },
            ObservationModel::Custom(c) => StepObservation::Custom { func: c.func.as_ref(), t },
        })
    }

    pub fn eval(&self, y: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
        if y.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), got: v.len() });
        }
        let mut out = vec![0.0; y.len()];
        self.at(t)?.eval(y, v, &mut out);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteDrift { t, state: y.to_vec() });
        }
        Ok(out)
    }

    /// For the linear bridge `Y_0` is the forward-noised rendering at
    /// reversed time `T`; other variants start at the origin.
    pub fn initial_law(&self, v: &[f64]) -> InitialLaw {
        match self {
            ObservationModel::LinearBridge(s) => {
                let (mean, std) = super::schedule::forward_marginal(v, s.horizon, s);
                InitialLaw::Gaussian { mean, std }
            }
            _ => InitialLaw::Fixed(vec![0.0; v.len()]),
        }
    }

    /// `log p(Y_0 = y0 | v)` up to a constant shared by all renderings.
    pub fn initial_log_likelihood(&self, y0: &[f64], v: &[f64]) -> f64 {
        match self.initial_law(v) {
            InitialLaw::Fixed(_) => 0.0,
            InitialLaw::Gaussian { mean, std } => {
                let d2: f64 = y0.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * d2 / (std * std)
            }
        }
    }
}

impl InitialLaw {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        match self {
            InitialLaw::Fixed(v) => v.clone(),
            InitialLaw::Gaussian { mean, std } => mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + std * z
                })
                .collect(),
        }
    }
}
