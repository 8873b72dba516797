use super::exact::{initial_log_weights, observation_mean, observation_table, ConditioningSpec};
use super::posterior::{normalize_log, SimplexTrajectory};
use crate::error::{Error, Result};
use crate::models::{Mixture, ObservationModel};
use crate::sde::SamplePath;

/// Result of one Euler step of the Kushner–Stratonovich equation.
#[derive(Debug, Clone, PartialEq)]
pub struct KushnerStep {
    pub pi: Vec<f64>,
    /// Whether a negative entry had to be clipped back onto the simplex.
    pub clipped: bool,
}

/// `pi_k += pi_k (H_k - hbar) . (dY - hbar dt)` with `hbar = sum_j pi_j H_j`,
/// followed by clipping negatives to 0 and renormalizing.
pub fn kushner_step(pi: &[f64], h: &[Vec<f64>], dy: &[f64], dt: f64) -> Result<KushnerStep> {
    if h.len() != pi.len() {
        return Err(Error::DimensionMismatch { expected: pi.len(), got: h.len() });
    }
    let n = dy.len();
    let mut table = Vec::with_capacity(pi.len() * n);
    for row in h {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        table.extend_from_slice(row);
    }
    let mut out = pi.to_vec();
    let mut hbar = vec![0.0; n];
    let clipped = kushner_update(&mut out, &table, dy, dt, &mut hbar)?;
    Ok(KushnerStep { pi: out, clipped })
}

/// In-place update on a `K x N` observation table. Returns whether clipping
/// occurred.
fn kushner_update(pi: &mut [f64], table: &[f64], dy: &[f64], dt: f64, hbar: &mut [f64]) -> Result<bool> {
    let n = dy.len();
    observation_mean(pi, table, hbar);
    let innov: Vec<f64> = dy.iter().zip(hbar.iter()).map(|(d, h)| d - h * dt).collect();
    let mut clipped = false;
    for (k, p) in pi.iter_mut().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let gain: f64 = table[k * n..(k + 1) * n]
            .iter()
            .zip(hbar.iter())
            .zip(&innov)
            .map(|((hk, hb), e)| (hk - hb) * e)
            .sum();
        *p += *p * gain;
        if *p < 0.0 {
            *p = 0.0;
            clipped = true;
        }
    }
    let z: f64 = pi.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::SimplexCollapse);
    }
    pi.iter_mut().for_each(|p| *p /= z);
    Ok(clipped)
}

/// Streaming Euler integrator of the Kushner–Stratonovich equation for a
/// finite mixture.
#[derive(Debug, Clone)]
pub struct KushnerFilter {
    pi: Vec<f64>,
    hbar: Vec<f64>,
    clip_events: usize,
}

impl KushnerFilter {
    pub fn new(mixture: &Mixture, obs: &ObservationModel, conditioning: &ConditioningSpec, y0: &[f64]) -> Result<Self> {
        let support = conditioning.support(mixture)?;
        let lw = initial_log_weights(mixture, obs, support.as_ref(), y0);
        let mut pi = vec![0.0; lw.len()];
        if !normalize_log(&lw, &mut pi) {
            return Err(Error::DegeneratePosterior { step: 0 });
        }
        Ok(KushnerFilter { pi, hbar: vec![0.0; y0.len()], clip_events: 0 })
    }

    /// Starts from an explicit probability vector.
    pub fn from_posterior(pi: Vec<f64>, dim: usize) -> Self {
        KushnerFilter { pi, hbar: vec![0.0; dim], clip_events: 0 }
    }

    pub fn posterior(&self) -> &[f64] {
        &self.pi
    }

    pub fn clip_events(&self) -> usize {
        self.clip_events
    }

    pub fn update(&mut self, table: &[f64], dy: &[f64], dt: f64) -> Result<()> {
        if kushner_update(&mut self.pi, table, dy, dt, &mut self.hbar)? {
            self.clip_events += 1;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KushnerRun {
    pub trajectory: SimplexTrajectory,
    pub clip_events: usize,
}

/// Iterates [`kushner_step`] along `path`.
pub fn kushner_filter(
    path: &SamplePath,
    mixture: &Mixture,
    obs: &ObservationModel,
    conditioning: &ConditioningSpec,
) -> Result<KushnerRun> {
    let n = path.dim();
    if n != mixture.dim() {
        return Err(Error::DimensionMismatch { expected: mixture.dim(), got: n });
    }
    let grid = path.grid();
    let mut filter = KushnerFilter::new(mixture, obs, conditioning, path.at(0))?;
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
    Ok(KushnerRun { trajectory: out, clip_events: filter.clip_events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_update() {
        let s = kushner_step(&[0.5, 0.5], &[vec![1.0], vec![-1.0]], &[0.1], 0.01).unwrap();
        assert!((s.pi[0] - 0.55).abs() < 1e-15 && (s.pi[1] - 0.45).abs() < 1e-15);
        assert!(!s.clipped);
    }

    #[test]
    fn zero_innovation_fixed_point() {
        let s = kushner_step(&[0.2, 0.8], &[vec![0.7], vec![0.7]], &[0.007], 0.01).unwrap();
        assert_eq!(s.pi, vec![0.2, 0.8]);
    }

    #[test]
    fn vertex_is_absorbing() {
        for dy in [-5.0, 0.0, 3.0] {
            let s = kushner_step(&[1.0, 0.0], &[vec![1.0], vec![-4.0]], &[dy], 0.01).unwrap();
            assert_eq!(s.pi, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn large_step_is_clipped() {
        let s = kushner_step(&[0.5, 0.5], &[vec![10.0], vec![-10.0]], &[-1.0], 0.01).unwrap();
        assert!(s.clipped);
        assert_eq!(s.pi, vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn output_stays_on_simplex(
            raw in proptest::collection::vec(0.01f64..1.0, 2..6),
            hs in proptest::collection::vec(-20.0f64..20.0, 12),
            dy in -2.0f64..2.0,
            dt in 1e-4f64..0.1,
        ) {
            let z: f64 = raw.iter().sum();
            let pi: Vec<f64> = raw.iter().map(|x| x / z).collect();
            let h: Vec<Vec<f64>> = (0..pi.len()).map(|k| vec![hs[2 * k], hs[2 * k + 1]]).collect();
            let s = kushner_step(&pi, &h, &[dy, -dy], dt).unwrap();
            prop_assert!(s.pi.iter().all(|&p| p >= 0.0));
            prop_assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
