use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `alpha * (T - t)` the `alpha -> 0` closed forms are used.
pub const SMALL_ALPHA_THRESHOLD: f64 = 1e-6;

/// Linear bridge schedule `m(t) = alpha / sinh(alpha (T - t))`,
/// `f(t) = d log m / dt = alpha coth(alpha (T - t))`.
///
/// With `alpha = 0` both collapse to `1 / (T - t)` and the bridge is the
/// Brownian bridge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub alpha: f64,
    pub horizon: f64,
}

fn ln_sinh(x: f64) -> f64 {
    if x > 30.0 {
        x - LN_2
    } else {
        x.sinh().ln()
    }
}

impl Schedule {
    pub fn new(alpha: f64, horizon: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Schedule { alpha, horizon })
    }

    /// Brownian-bridge schedule (`alpha = 0`).
    pub fn brownian(horizon: f64) -> Self {
        Schedule { alpha: 0.0, horizon }
    }

    fn remaining(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(self.horizon - t)
    }

    pub fn log_m(&self, t: f64) -> Result<f64> {
        let rem = self.remaining(t)?;
        let x = self.alpha * rem;
        if x < SMALL_ALPHA_THRESHOLD {
            Ok(-rem.ln())
        } else {
            Ok(self.alpha.ln() - ln_sinh(x))
        }
    }

    pub fn m(&self, t: f64) -> Result<f64> {
        self.log_m(t).map(f64::exp)
    }

    pub fn f(&self, t: f64) -> Result<f64> {
        let rem = self.remaining(t)?;
        let x = self.alpha * rem;
        if x < SMALL_ALPHA_THRESHOLD {
            Ok(1.0 / rem)
        } else {
            Ok(self.alpha / x.tanh())
        }
    }

    /// `e^{-alpha s}`: mean contraction of the forward (noising) process after
    /// reversed time `s`.
    pub fn decay(&self, s: f64) -> f64 {
        (-self.alpha * s).exp()
    }

    /// `(1 - e^{-2 alpha s}) / (2 alpha)`, or `s` when `alpha = 0`.
    pub fn noise_variance(&self, s: f64) -> f64 {
        if self.alpha == 0.0 {
            s
        } else {
            -(-2.0 * self.alpha * s).exp_m1() / (2.0 * self.alpha)
        }
    }

    /// `m(s) / m(t)` evaluated without forming either factor, valid also when
    /// one of the arguments is `T` (where `m` is infinite).
    pub(crate) fn sinh_ratio(&self, num: f64, den: f64) -> f64 {
        // sinh(alpha a) / sinh(alpha b), or a / b in the small-alpha limit
        let (a, b) = (num, den);
        if self.alpha * a.max(b) < SMALL_ALPHA_THRESHOLD {
            a / b
        } else if self.alpha * a.max(b) > 30.0 {
            let la = if a == 0.0 { f64::NEG_INFINITY } else { ln_sinh(self.alpha * a) };
            (la - ln_sinh(self.alpha * b)).exp()
        } else {
            (self.alpha * a).sinh() / (self.alpha * b).sinh()
        }
    }
}

/// `m(t) v - f(t) y`, the observation drift of the linear bridge.
pub fn bridge_drift(y: &[f64], v: &[f64], t: f64, schedule: &Schedule) -> Result<Vec<f64>> {
    if y.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: v.len() });
    }
    let (m, f) = (schedule.m(t)?, schedule.f(t)?);
    Ok(y.iter().zip(v).map(|(yi, vi)| m * vi - f * yi).collect())
}

/// Mean and per-component standard deviation of the forward (noising)
/// process `dY^ = -alpha Y^ ds + dW^` started at `v`, after reversed time `s`.
pub fn forward_marginal(v: &[f64], s: f64, schedule: &Schedule) -> (Vec<f64>, f64) {
    let s = s.max(0.0);
    let d = schedule.decay(s);
    (v.iter().map(|x| d * x).collect(), schedule.noise_variance(s).sqrt())
}

/// Panel count of the midpoint rule used for the bridge variance.
pub const BRIDGE_VARIANCE_PANELS: usize = 10_000;

/// Moments of the linear bridge started at `y0` and pinned at `v`:
/// mean `y0 m(0)/m(t) + v m(0)/m(T-t)`, variance `m(t)^-2 \int_0^t m(s)^2 ds`.
pub fn analytic_bridge_moments(y0: &[f64], v: &[f64], t: f64, schedule: &Schedule) -> Result<(Vec<f64>, f64)> {
    if y0.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: y0.len(), got: v.len() });
    }
    let horizon = schedule.horizon;
    schedule.remaining(t)?;
    let cy = schedule.sinh_ratio(horizon - t, horizon);
    let cv = schedule.sinh_ratio(t, horizon);
    let mean = y0.iter().zip(v).map(|(a, b)| cy * a + cv * b).collect();
    if t == 0.0 {
        return Ok((mean, 0.0));
    }
    let log_mt = schedule.log_m(t)?;
    let h = t / BRIDGE_VARIANCE_PANELS as f64;
    let mut acc = 0.0;
    for i in 0..BRIDGE_VARIANCE_PANELS {
        let s = (i as f64 + 0.5) * h;
        acc += (2.0 * (schedule.log_m(s)? - log_mt)).exp();
    }
    Ok((mean, acc * h))
}
