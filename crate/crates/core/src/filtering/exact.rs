use serde::{Deserialize, Serialize};

use super::girsanov::girsanov_increment;
use super::posterior::{normalize_log, project_simplex, SimplexTrajectory};
use crate::error::{Error, Result};
use crate::models::{Mixture, ObservationModel, Support};
use crate::sde::SamplePath;

/// Side information available to a filter on top of the measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditioningSpec {
    MeasurementsOnly,
    /// The value of one labelled attribute is known from the start.
    MeasurementsPlusLabel { attribute: String, label: u32 },
    /// The component itself is known.
    MeasurementsPlusFullLatent { component: usize },
}

impl ConditioningSpec {
    pub fn label(attribute: &str, label: u32) -> Self {
        ConditioningSpec::MeasurementsPlusLabel { attribute: attribute.to_string(), label }
    }

    /// Components consistent with the side information; `None` means all.
    pub fn support(&self, mixture: &Mixture) -> Result<Option<Support>> {
        match self {
            ConditioningSpec::MeasurementsOnly => Ok(None),
            ConditioningSpec::MeasurementsPlusLabel { attribute, label } => {
                mixture.support(attribute, *label).map(Some)
            }
            ConditioningSpec::MeasurementsPlusFullLatent { component } => {
                if *component >= mixture.len() {
                    return Err(Error::InvalidArgument(format!("component {component} out of range")));
                }
                Ok(Some(Support::single(mixture.len(), *component)))
            }
        }
    }
}

/// `H(y, v_k, t)` for every component, written row-major into `out` (`K x N`).
pub fn observation_table(mixture: &Mixture, obs: &ObservationModel, y: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
    let n = y.len();
    let step = obs.at(t)?;
    for (k, v) in mixture.renderings().iter().enumerate() {
        step.eval(y, v, &mut out[k * n..(k + 1) * n]);
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteDrift { t, state: y.to_vec() });
    }
    Ok(())
}

/// `<pi, H>` for a `K x N` observation table.
pub fn observation_mean(pi: &[f64], table: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    for (k, p) in pi.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for (o, h) in out.iter_mut().zip(&table[k * n..(k + 1) * n]) {
            *o += p * h;
        }
    }
}

/// Initial log-weights: restricted log-prior plus the log-likelihood of `Y_0`.
pub(crate) fn initial_log_weights(mixture: &Mixture, obs: &ObservationModel, support: Option<&Support>, y0: &[f64]) -> Vec<f64> {
    mixture
        .weights()
        .iter()
        .zip(mixture.renderings())
        .enumerate()
        .map(|(k, (w, v))| {
            if support.is_some_and(|s| !s.contains(k)) {
                f64::NEG_INFINITY
            } else {
                w.ln() + obs.initial_log_likelihood(y0, v)
            }
        })
        .collect()
}

/// Streaming Kallianpur–Striebel filter for a finite mixture: the posterior
/// is the prior reweighted by the Girsanov likelihood of every hypothesis.
#[derive(Debug, Clone)]
pub struct ExactFilter {
    log_psi: Vec<f64>,
    pi: Vec<f64>,
    steps: usize,
}

impl ExactFilter {
    pub fn new(mixture: &Mixture, obs: &ObservationModel, conditioning: &ConditioningSpec, y0: &[f64]) -> Result<Self> {
        Self::with_support(mixture, obs, conditioning.support(mixture)?.as_ref(), y0)
    }

    /// Filter restricted to the components in `support` (all when `None`).
    pub fn with_support(mixture: &Mixture, obs: &ObservationModel, support: Option<&Support>, y0: &[f64]) -> Result<Self> {
        let log_psi = initial_log_weights(mixture, obs, support, y0);
        let mut pi = vec![0.0; log_psi.len()];
        if !normalize_log(&log_psi, &mut pi) {
            return Err(Error::DegeneratePosterior { step: 0 });
        }
        Ok(ExactFilter { log_psi, pi, steps: 0 })
    }

    pub fn posterior(&self) -> &[f64] {
        &self.pi
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_psi
    }

    /// Advances by one step given the observation table at the left endpoint.
    pub fn update(&mut self, table: &[f64], dy: &[f64], dt: f64) -> Result<()> {
        let n = dy.len();
        for (k, lw) in self.log_psi.iter_mut().enumerate() {
            if *lw == f64::NEG_INFINITY {
                continue;
            }
            *lw += girsanov_increment(&table[k * n..(k + 1) * n], dy, dt);
        }
        self.steps += 1;
        if !normalize_log(&self.log_psi, &mut self.pi) {
            return Err(Error::DegeneratePosterior { step: self.steps });
        }
        Ok(())
    }
}

/// Exact posterior over the mixture components at every grid point of `path`.
pub fn exact_discrete_filter(
    path: &SamplePath,
    mixture: &Mixture,
    obs: &ObservationModel,
    conditioning: &ConditioningSpec,
) -> Result<SimplexTrajectory> {
    let n = path.dim();
    if n != mixture.dim() {
        return Err(Error::DimensionMismatch { expected: mixture.dim(), got: n });
    }
    let grid = path.grid();
    let mut filter = ExactFilter::new(mixture, obs, conditioning, path.at(0))?;
    let mut out = SimplexTrajectory::with_capacity(mixture.len(), grid.len());
    out.push(filter.posterior());
    let mut table = vec![0.0; mixture.len() * n];
    let mut dy = vec![0.0; n];
    for i in 0..grid.steps() {
        observation_table(mixture, obs, path.at(i), grid.t(i), &mut table)?;
        path.increment(i, &mut dy);
        filter.update(&table, &dy, grid.dt(i))?;
        out.push(filter.posterior());
    }
    Ok(out)
}

/// `<pi_i, H(Y_i, ., t_i)>` along a posterior trajectory.
pub fn filtered_drift(
    path: &SamplePath,
    posterior: &SimplexTrajectory,
    mixture: &Mixture,
    obs: &ObservationModel,
) -> Result<Vec<Vec<f64>>> {
    if posterior.len() != path.len() {
        return Err(Error::DimensionMismatch { expected: path.len(), got: posterior.len() });
    }
    let n = path.dim();
    let mut table = vec![0.0; mixture.len() * n];
    let grid = path.grid();
    (0..grid.steps())
        .map(|i| {
            observation_table(mixture, obs, path.at(i), grid.t(i), &mut table)?;
            let rows: Vec<Vec<f64>> = table.chunks(n).map(<[f64]>::to_vec).collect();
            Ok(project_simplex(posterior.at(i), &rows))
        })
        .collect()
}
