use std::f64::consts::PI;

use super::scenario::{LatentScenario, Support};
use super::schedule::Schedule;
use crate::error::{Error, Result};

/// Exact scores and posterior means of the linear-diffusion marginals
/// `Y_t | V ~ N(e^{-alpha (T-t)} V, sigma^2(T-t) I)`.
#[derive(Debug, Clone)]
pub struct ScoreModel {
    scenario: LatentScenario,
    schedule: Schedule,
}

/// Numerically stable `log sum exp`; `-inf` entries are ignored.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_finite(y: &[f64], t: f64) -> Result<()> {
    if !t.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input to score model".into()));
    }
    Ok(())
}

impl ScoreModel {
    pub fn new(scenario: LatentScenario, schedule: Schedule) -> Self {
        ScoreModel { scenario, schedule }
    }

    pub fn scenario(&self) -> &LatentScenario {
        &self.scenario
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.scenario.dim()
    }

    /// `(decay, noise variance)` of `Y_t | V` at generative time `t`.
    fn marginal_coefficients(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0 && t < self.schedule.horizon) {
            return Err(Error::TimeOutOfRange { t, horizon: self.schedule.horizon });
        }
        let s = self.schedule.horizon - t;
        Ok((self.schedule.decay(s), self.schedule.noise_variance(s)))
    }

    /// Normalized log-responsibilities `log P(component = k | Y_t = y)`,
    /// restricted to `support`.
    pub fn log_responsibilities(&self, y: &[f64], t: f64, support: Option<&Support>) -> Result<Vec<f64>> {
        check_finite(y, t)?;
        let mix = self.scenario.as_mixture()?;
        if y.len() != mix.dim() {
            return Err(Error::DimensionMismatch { expected: mix.dim(), got: y.len() });
        }
        let (d, var) = self.marginal_coefficients(t)?;
        let mut lr: Vec<f64> = mix
            .weights()
            .iter()
            .zip(mix.renderings())
            .enumerate()
            .map(|(k, (w, v))| {
                if support.is_some_and(|s| !s.contains(k)) {
                    return f64::NEG_INFINITY;
                }
                let d2: f64 = y.iter().zip(v).map(|(a, b)| (a - d * b).powi(2)).sum();
                w.ln() - 0.5 * d2 / var
            })
            .collect();
        let z = log_sum_exp(&lr);
        if z == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument("conditioning support is empty".into()));
        }
        lr.iter_mut().for_each(|x| *x -= z);
        Ok(lr)
    }

    pub fn responsibilities(&self, y: &[f64], t: f64, support: Option<&Support>) -> Result<Vec<f64>> {
        Ok(self.log_responsibilities(y, t, support)?.into_iter().map(f64::exp).collect())
    }

    /// `E[V | Y_t = y]`, optionally also conditioned on the components in
    /// `support`.
    pub fn posterior_mean(&self, y: &[f64], t: f64, support: Option<&Support>) -> Result<Vec<f64>> {
        match &self.scenario {
            LatentScenario::Mixture(mix) => {
                let r = self.responsibilities(y, t, support)?;
                let mut out = vec![0.0; mix.dim()];
                for (rk, v) in r.iter().zip(mix.renderings()) {
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += rk * vi;
                    }
                }
                Ok(out)
            }
            LatentScenario::Gaussian(g) => {
                check_finite(y, t)?;
                if support.is_some() {
                    return Err(Error::InvalidArgument("label conditioning needs a mixture scenario".into()));
                }
                if y.len() != g.dim() {
                    return Err(Error::DimensionMismatch { expected: g.dim(), got: y.len() });
                }
                let (d, var) = self.marginal_coefficients(t)?;
                let gain = g.variance * d / (d * d * g.variance + var);
                Ok(g.mean.iter().zip(y).map(|(m, yi)| m + gain * (yi - d * m)).collect())
            }
        }
    }

    /// `grad_y log p(y, t)` (or of `p(y, t | support)`), via Tweedie's
    /// identity `(e^{-alpha(T-t)} E[V|y] - y) / sigma^2(T-t)`.
    pub fn score(&self, y: &[f64], t: f64, support: Option<&Support>) -> Result<Vec<f64>> {
        let mean = self.posterior_mean(y, t, support)?;
        let (d, var) = self.marginal_coefficients(t)?;
        Ok(mean.iter().zip(y).map(|(m, yi)| (d * m - yi) / var).collect())
    }

    /// `log p(y, t)` including normalization.
    pub fn log_density(&self, y: &[f64], t: f64) -> Result<f64> {
        check_finite(y, t)?;
        let (d, var) = self.marginal_coefficients(t)?;
        let n = y.len() as f64;
        match &self.scenario {
            LatentScenario::Mixture(mix) => {
                let terms: Vec<f64> = mix
                    .weights()
                    .iter()
                    .zip(mix.renderings())
                    .map(|(w, v)| {
                        let d2: f64 = y.iter().zip(v).map(|(a, b)| (a - d * b).powi(2)).sum();
                        w.ln() - 0.5 * d2 / var - 0.5 * n * (2.0 * PI * var).ln()
                    })
                    .collect();
                Ok(log_sum_exp(&terms))
            }
            LatentScenario::Gaussian(g) => {
                let s = d * d * g.variance + var;
                let d2: f64 = y.iter().zip(&g.mean).map(|(a, b)| (a - d * b).powi(2)).sum();
                Ok(-0.5 * d2 / s - 0.5 * n * (2.0 * PI * s).ln())
            }
        }
    }

    /// `grad_y log P(V = v | Y_t = y)`, the score of the terminal law given
    /// the current state. For mixtures `v` must be one of the renderings and
    /// the gradient of its log-responsibility is formed component by
    /// component; for Gaussians it is the gradient of the Gaussian posterior
    /// density of `V`.
    pub fn terminal_log_gradient(&self, y: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        let (d, var) = self.marginal_coefficients(t)?;
        match &self.scenario {
            LatentScenario::Mixture(mix) => {
                let k = mix
                    .renderings()
                    .iter()
                    .position(|r| r.as_slice() == v)
                    .ok_or_else(|| Error::InvalidArgument("value is not a rendering of the mixture".into()))?;
                let r = self.responsibilities(y, t, None)?;
                // grad log N_j = (d v_j - y) / var; grad log r_k = grad log N_k - sum_j r_j grad log N_j
                let mut out: Vec<f64> = y.iter().zip(mix.rendering(k)).map(|(yi, vi)| (d * vi - yi) / var).collect();
                for (rj, vj) in r.iter().zip(mix.renderings()) {
                    for ((o, yi), vji) in out.iter_mut().zip(y).zip(vj) {
                        *o -= rj * (d * vji - yi) / var;
                    }
                }
                Ok(out)
            }
            LatentScenario::Gaussian(g) => {
                if g.variance == 0.0 {
                    return Ok(vec![0.0; y.len()]);
                }
                let post_var = 1.0 / (1.0 / g.variance + d * d / var);
                let dmu_dy = post_var * d / var;
                Ok(g.mean
                    .iter()
                    .zip(y)
                    .zip(v)
                    .map(|((m, yi), vi)| {
                        let mu = post_var * (m / g.variance + d * yi / var);
                        (vi - mu) * dmu_dy / post_var
                    })
                    .collect())
            }
        }
    }

    /// `grad_y log p(y, t | V = v)`: the score of the forward marginal started
    /// at a known rendering.
    pub fn conditional_score_given_rendering(&self, y: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        let (d, var) = self.marginal_coefficients(t)?;
        Ok(y.iter().zip(v).map(|(yi, vi)| (d * vi - yi) / var).collect())
    }

    /// Drift of the backward (generative) SDE in score form:
    /// `alpha y + 2 alpha (e^{-alpha(T-t)} E[V|y] - y) / (1 - e^{-2 alpha (T-t)})`.
    /// In the `alpha -> 0` limit the score term is `(E[V|y] - y) / (T - t)`.
    pub fn score_form_drift(&self, y: &[f64], t: f64) -> Result<Vec<f64>> {
        let mean = self.posterior_mean(y, t, None)?;
        let alpha = self.schedule.alpha;
        let s = self.schedule.horizon - t;
        if alpha * s < super::schedule::SMALL_ALPHA_THRESHOLD {
            return Ok(mean.iter().zip(y).map(|(m, yi)| (m - yi) / s).collect());
        }
        let e = (-alpha * s).exp();
        let denom = -(-2.0 * alpha * s).exp_m1();
        Ok(mean
            .iter()
            .zip(y)
            .map(|(m, yi)| alpha * yi + 2.0 * alpha * (e * m - yi) / denom)
            .collect())
    }

    /// Drift of the generative SDE in filtering form:
    /// `m(t) E[V|y] - f(t) y`.
    pub fn filter_form_drift(&self, y: &[f64], t: f64) -> Result<Vec<f64>> {
        let mean = self.posterior_mean(y, t, None)?;
        super::schedule::bridge_drift(y, &mean, t, &self.schedule)
    }
}
