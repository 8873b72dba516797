use crate::error::{Error, Result};
use crate::models::log_sum_exp;

/// Weighted particle approximation of a posterior; weights are kept in the
/// log domain and only normalized on read.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<L> {
    pub particles: Vec<L>,
    pub log_weights: Vec<f64>,
}

impl<L> ParticleCloud<L> {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let z = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|w| (w - z).exp()).collect()
    }

    /// `1 / sum w_i^2` of the normalized weights.
    pub fn effective_sample_size(&self) -> f64 {
        let w = self.normalized_weights();
        1.0 / w.iter().map(|x| x * x).sum::<f64>()
    }

    /// Weighted mean of `f` over the cloud.
    pub fn project<F: Fn(&L) -> Vec<f64>>(&self, f: F) -> Vec<f64> {
        let w = self.normalized_weights();
        let mut out: Vec<f64> = Vec::new();
        for (wi, p) in w.iter().zip(&self.particles) {
            let v = f(p);
            if out.is_empty() {
                out = vec![0.0; v.len()];
            }
            for (o, x) in out.iter_mut().zip(&v) {
                *o += wi * x;
            }
        }
        out
    }
}

impl ParticleCloud<usize> {
    /// Histogram of a cloud of component indices.
    pub fn to_simplex(&self, k: usize) -> Vec<f64> {
        let mut pi = vec![0.0; k];
        for (w, &c) in self.normalized_weights().iter().zip(&self.particles) {
            pi[c] += w;
        }
        pi
    }
}

/// A posterior measure `pi_t`: either a probability vector over the
/// components of a finite mixture or a weighted particle cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorState {
    Simplex(Vec<f64>),
    Particles(ParticleCloud<Vec<f64>>),
}

/// What to average against a posterior.
pub enum Projection<'a> {
    /// `phi(k)` for every component.
    Table(&'a [Vec<f64>]),
    /// `phi(x)` for a continuous latent.
    Function(&'a dyn Fn(&[f64]) -> Vec<f64>),
}

/// `<pi, phi>`.
pub fn posterior_project(pi: &PosteriorState, statistic: Projection<'_>) -> Result<Vec<f64>> {
    match (pi, statistic) {
        (PosteriorState::Simplex(p), Projection::Table(table)) => {
            if table.len() != p.len() {
                return Err(Error::DimensionMismatch { expected: p.len(), got: table.len() });
            }
            Ok(project_simplex(p, table))
        }
        (PosteriorState::Particles(cloud), Projection::Function(f)) => Ok(cloud.project(|x| f(x))),
        (PosteriorState::Particles(cloud), Projection::Table(table)) => {
            // particles carrying a component index in their first coordinate
            Ok(cloud.project(|x| table[x[0] as usize].clone()))
        }
        (PosteriorState::Simplex(_), Projection::Function(_)) => Err(Error::InvalidArgument(
            "a simplex posterior needs a per-component statistic table".into(),
        )),
    }
}

pub(crate) fn project_simplex(p: &[f64], table: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; table.first().map_or(0, Vec::len)];
    for (pk, row) in p.iter().zip(table) {
        if *pk == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(row) {
            *o += pk * x;
        }
    }
    out
}

/// Posterior trajectory over `K` components, one probability vector per grid
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexTrajectory {
    k: usize,
    data: Vec<f64>,
}

impl SimplexTrajectory {
    pub(crate) fn with_capacity(k: usize, points: usize) -> Self {
        SimplexTrajectory { k, data: Vec::with_capacity(k * points) }
    }

    pub(crate) fn push(&mut self, pi: &[f64]) {
        debug_assert_eq!(pi.len(), self.k);
        self.data.extend_from_slice(pi);
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn state(&self, i: usize) -> PosteriorState {
        PosteriorState::Simplex(self.at(i).to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalizes log-weights into a probability vector with max-subtraction.
pub(crate) fn normalize_log(log_w: &[f64], out: &mut [f64]) -> bool {
    let z = log_sum_exp(log_w);
    if !z.is_finite() {
        return false;
    }
    for (o, l) in out.iter_mut().zip(log_w) {
        *o = (l - z).exp();
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_projection() {
        let table = vec![vec![1.0], vec![2.0], vec![3.0]];
        let pi = PosteriorState::Simplex(vec![0.0, 1.0, 0.0]);
        assert_eq!(posterior_project(&pi, Projection::Table(&table)).unwrap(), vec![2.0]);
        let uni = PosteriorState::Simplex(vec![1.0 / 3.0; 3]);
        let m = posterior_project(&uni, Projection::Table(&table)).unwrap()[0];
        assert!((m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn particle_projection_and_ess() {
        let cloud = ParticleCloud {
            particles: vec![vec![1.0], vec![3.0]],
            log_weights: vec![0.0, 0.0],
        };
        assert_eq!(cloud.effective_sample_size(), 2.0);
        let sq = |x: &[f64]| vec![x[0] * x[0]];
        let st = PosteriorState::Particles(cloud);
        assert_eq!(posterior_project(&st, Projection::Function(&sq)).unwrap(), vec![5.0]);
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let pi = PosteriorState::Simplex(vec![0.5, 0.5]);
        assert!(posterior_project(&pi, Projection::Table(&[vec![1.0]])).is_err());
    }
}
