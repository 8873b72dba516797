//! Bootstrap particle filter for continuous-time observations.
//!
//! Particles are drawn from the (conditioned) prior of the latent and carry
//! log-weights that follow the Zakai recursion
//! `d log w = H(y, x, t) . dY - |H(y, x, t)|^2 dt / 2`. When the effective
//! sample size drops below the resampling threshold the cloud is resampled
//! with the systematic (low-variance) scheme and the weights are reset.

use rand::Rng;

use super::exact::ConditioningSpec;
use super::girsanov::girsanov_increment;
use super::posterior::ParticleCloud;
use crate::error::{Error, Result};
use crate::models::{sample_categorical, GaussianLatent, Mixture, ObservationModel, Support};
use crate::sde::{purpose, RandomStream, SamplePath};

/// A latent variable the particle filter can sample and render.
pub trait LatentModel {
    type Latent: Clone;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Latent;

    /// The rendering `g(x)` entering the observation function.
    fn rendering<'a>(&'a self, x: &'a Self::Latent) -> &'a [f64];
}

/// Component-index latent of a finite mixture, optionally restricted to the
/// components consistent with some side information.
#[derive(Debug, Clone)]
pub struct MixtureLatent<'a> {
    mixture: &'a Mixture,
    prior: Vec<f64>,
}

impl<'a> MixtureLatent<'a> {
    pub fn new(mixture: &'a Mixture, conditioning: &ConditioningSpec) -> Result<Self> {
        let support: Option<Support> = conditioning.support(mixture)?;
        Ok(MixtureLatent { mixture, prior: mixture.restricted_prior(support.as_ref()) })
    }
}

impl LatentModel for MixtureLatent<'_> {
    type Latent = usize;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.prior, rng)
    }

    fn rendering<'b>(&'b self, x: &'b usize) -> &'b [f64] {
        self.mixture.rendering(*x)
    }
}

impl LatentModel for GaussianLatent {
    type Latent = Vec<f64>;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample(rng)
    }

    fn rendering<'a>(&'a self, x: &'a Vec<f64>) -> &'a [f64] {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResamplePolicy {
    /// Systematic resampling whenever `ESS < threshold * n`.
    Systematic { threshold: f64 },
    Never,
}

impl Default for ResamplePolicy {
    fn default() -> Self {
        ResamplePolicy::Systematic { threshold: 0.5 }
    }
}

/// Output of [`particle_filter`]: per-grid-point summaries of the rendering
/// posterior plus full clouds at the requested indices.
#[derive(Debug, Clone)]
pub struct ParticleRun<L> {
    /// Weighted mean of `g(x)` at every grid point.
    pub means: Vec<Vec<f64>>,
    /// Weighted per-coordinate variance of `g(x)` at every grid point.
    pub variances: Vec<Vec<f64>>,
    /// Effective sample size at every grid point, before resampling.
    pub ess: Vec<f64>,
    /// Steps after which the cloud was resampled.
    pub resample_steps: Vec<usize>,
    pub snapshots: Vec<(usize, ParticleCloud<L>)>,
    pub last: ParticleCloud<L>,
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut idx = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 / n as f64;
        while u > cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        idx.push(j);
    }
    idx
}

fn summarize<M: LatentModel>(model: &M, cloud: &ParticleCloud<M::Latent>, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dim = model.rendering(&cloud.particles[0]).len();
    let mut mean = vec![0.0; dim];
    for (wi, p) in w.iter().zip(&cloud.particles) {
        for (m, x) in mean.iter_mut().zip(model.rendering(p)) {
            *m += wi * x;
        }
    }
    let mut var = vec![0.0; dim];
    for (wi, p) in w.iter().zip(&cloud.particles) {
        for ((v, x), m) in var.iter_mut().zip(model.rendering(p)).zip(&mean) {
            *v += wi * (x - m) * (x - m);
        }
    }
    (mean, var)
}

/// Runs the particle filter along `path`.
///
/// Collapse of the weights (ESS < 2 with at least 3 particles) is reported
/// as an error carrying the time of the collapse. With a single particle the
/// filter returns that particle's point mass.
pub fn particle_filter<M: LatentModel>(
    path: &SamplePath,
    model: &M,
    obs: &ObservationModel,
    n_particles: usize,
    policy: ResamplePolicy,
    stream: RandomStream,
    record: &[usize],
) -> Result<ParticleRun<M::Latent>> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("at least one particle is required".into()));
    }
    let grid = path.grid();
    let dim = path.dim();
    let mut prior_rng = stream.derive(purpose::LATENT).rng();
    let mut resample_rng = stream.derive(purpose::RESAMPLE).rng();
    let particles: Vec<M::Latent> = (0..n_particles).map(|_| model.sample_prior(&mut prior_rng)).collect();
    if model.rendering(&particles[0]).len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: model.rendering(&particles[0]).len() });
    }
    let log_weights = particles
        .iter()
        .map(|x| obs.initial_log_likelihood(path.at(0), model.rendering(x)))
        .collect();
    let mut cloud = ParticleCloud { particles, log_weights };

    let mut run = ParticleRun {
        means: Vec::with_capacity(grid.len()),
        variances: Vec::with_capacity(grid.len()),
        ess: Vec::with_capacity(grid.len()),
        resample_steps: Vec::new(),
        snapshots: Vec::new(),
        last: cloud.clone(),
    };
    let mut h = vec![0.0; dim];
    let mut dy = vec![0.0; dim];
    for i in 0..grid.len() {
        let w = cloud.normalized_weights();
        let ess = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
        if !ess.is_finite() || (n_particles > 2 && ess < 2.0) {
            return Err(Error::WeightCollapse { t: grid.t(i) });
        }
        let (mean, var) = summarize(model, &cloud, &w);
        run.means.push(mean);
        run.variances.push(var);
        run.ess.push(ess);
        if record.contains(&i) {
            run.snapshots.push((i, cloud.clone()));
        }
        if i == grid.steps() {
            break;
        }
        if let ResamplePolicy::Systematic { threshold } = policy {
            if ess < threshold * n_particles as f64 {
                let idx = systematic_resample(&w, &mut resample_rng);
                cloud.particles = idx.iter().map(|&j| cloud.particles[j].clone()).collect();
                cloud.log_weights.iter_mut().for_each(|l| *l = 0.0);
                run.resample_steps.push(i);
            }
        }
        let step = obs.at(grid.t(i))?;
        path.increment(i, &mut dy);
        let dt = grid.dt(i);
        let y = path.at(i);
        for (x, lw) in cloud.particles.iter().zip(cloud.log_weights.iter_mut()) {
            step.eval(y, model.rendering(x), &mut h);
            *lw += girsanov_increment(&h, &dy, dt);
        }
    }
    run.last = cloud;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{make_grid, Spacing};

    #[test]
    fn systematic_resampling_counts() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let mut rng = RandomStream::new(2, 2).rng();
        let idx = systematic_resample(&w, &mut rng);
        let mut c = [0usize; 4];
        for i in idx {
            c[i] += 1;
        }
        // each count is floor or ceil of n * w_i
        for (ci, wi) in c.iter().zip(w) {
            let e = 4.0 * wi;
            assert!((*ci as f64 - e).abs() < 1.0);
        }
    }

    #[test]
    fn single_particle_is_a_point_mass() {
        let g = GaussianLatent::new(vec![0.0], 1.0).unwrap();
        let grid = make_grid(1.0, 10, 0.1, Spacing::Uniform).unwrap();
        let path = SamplePath::new(grid, 1, (0..11).map(|i| 0.05 * i as f64).collect()).unwrap();
        let run = particle_filter(&path, &g, &ObservationModel::Static, 1, ResamplePolicy::default(), RandomStream::new(1, 0), &[]).unwrap();
        let x = run.last.particles[0][0];
        assert!(run.means.iter().all(|m| m[0] == x));
        assert!(run.variances.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn collapse_is_reported_with_time() {
        let g = GaussianLatent::new(vec![0.0], 100.0).unwrap();
        let grid = make_grid(1.0, 10, 0.1, Spacing::Uniform).unwrap();
        // enormous jump in Y makes one particle dominate
        let mut vals = vec![0.0; 11];
        vals[1] = 1e4;
        let path = SamplePath::new(grid, 1, vals).unwrap();
        let err = particle_filter(&path, &g, &ObservationModel::Static, 50, ResamplePolicy::Never, RandomStream::new(1, 0), &[])
            .unwrap_err();
        assert!(matches!(err, Error::WeightCollapse { t } if (t - 0.09).abs() < 1e-12));
    }
}
