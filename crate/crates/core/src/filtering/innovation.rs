use super::exact::filtered_drift;
use super::posterior::SimplexTrajectory;
use crate::error::{Error, Result};
use crate::models::{Mixture, ObservationModel};
use crate::sde::{SamplePath, TimeGrid};

/// Increments of the innovation process `dW^R = dY - <pi, H> dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationPath {
    pub grid: TimeGrid,
    pub dim: usize,
    increments: Vec<f64>,
}

impl InnovationPath {
    pub fn step(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.increments
    }
}

/// Innovation from an arbitrary per-step filtered drift `hbar_i`.
pub fn innovation_from_drift(path: &SamplePath, drift: &[Vec<f64>]) -> Result<InnovationPath> {
    let grid = path.grid();
    if drift.len() != grid.steps() {
        return Err(Error::DimensionMismatch { expected: grid.steps(), got: drift.len() });
    }
    let dim = path.dim();
    let mut dy = vec![0.0; dim];
    let mut increments = Vec::with_capacity(grid.steps() * dim);
    for (i, hbar) in drift.iter().enumerate() {
        path.increment(i, &mut dy);
        let dt = grid.dt(i);
        increments.extend(dy.iter().zip(hbar).map(|(d, h)| d - h * dt));
    }
    Ok(InnovationPath { grid: grid.clone(), dim, increments })
}

/// `dW^R_i = dY_i - <pi_i, H(Y_i, ., t_i)> dt_i` for a mixture posterior.
pub fn extract_innovation(
    path: &SamplePath,
    posterior: &SimplexTrajectory,
    mixture: &Mixture,
    obs: &ObservationModel,
) -> Result<InnovationPath> {
    let drift = filtered_drift(path, posterior, mixture, obs)?;
    innovation_from_drift(path, &drift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::{exact_discrete_filter, ConditioningSpec};
    use crate::models::{CustomObservation, Schedule};
    use crate::sde::{euler_maruyama, make_grid, sample_brownian_increments, RandomStream, Spacing};

    fn mixture() -> Mixture {
        Mixture::new(vec![0.4, 0.6], vec![vec![-1.0], vec![1.0]], vec![]).unwrap()
    }

    #[test]
    fn full_latent_recovers_driving_noise() {
        let m = mixture();
        let s = Schedule::new(1.0, 1.0).unwrap();
        let obs = ObservationModel::LinearBridge(s);
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let inc = sample_brownian_increments(&grid, 1, RandomStream::new(9, 1));
        let v = m.rendering(1).to_vec();
        let path = euler_maruyama(|y, t, a| a[0] = s.m(t).unwrap() * v[0] - s.f(t).unwrap() * y[0], &[0.2], &grid, &inc)
            .unwrap();
        let post =
            exact_discrete_filter(&path, &m, &obs, &ConditioningSpec::MeasurementsPlusFullLatent { component: 1 }).unwrap();
        let w = extract_innovation(&path, &post, &m, &obs).unwrap();
        for i in 0..w.steps() {
            assert!((w.step(i)[0] - inc.step(i)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_observation_gives_raw_increments() {
        let m = mixture();
        let obs = ObservationModel::Custom(CustomObservation::new("zero", |_, _, _, out| out.fill(0.0)));
        let grid = make_grid(1.0, 20, 0.1, Spacing::Uniform).unwrap();
        let inc = sample_brownian_increments(&grid, 1, RandomStream::new(9, 2));
        let path = euler_maruyama(|_, _, a| a[0] = 0.0, &[0.0], &grid, &inc).unwrap();
        let post = exact_discrete_filter(&path, &m, &obs, &ConditioningSpec::MeasurementsOnly).unwrap();
        let w = extract_innovation(&path, &post, &m, &obs).unwrap();
        let mut dy = [0.0];
        for i in 0..w.steps() {
            path.increment(i, &mut dy);
            assert_eq!(w.step(i)[0], dy[0]);
        }
    }

    #[test]
    fn misaligned_posterior_is_rejected() {
        let m = mixture();
        let grid = make_grid(1.0, 20, 0.1, Spacing::Uniform).unwrap();
        let path = SamplePath::new(grid.clone(), 1, vec![0.0; 21]).unwrap();
        let short = SamplePath::new(grid.subsample(2).unwrap(), 1, vec![0.0; 11]).unwrap();
        let post = exact_discrete_filter(&short, &m, &ObservationModel::Static, &ConditioningSpec::MeasurementsOnly).unwrap();
        assert!(extract_innovation(&path, &post, &m, &ObservationModel::Static).is_err());
    }
}
