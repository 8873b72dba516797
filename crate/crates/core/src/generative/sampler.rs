use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bridge::check_step_ratio;
use crate::error::{Error, Result};
use crate::filtering::{observation_mean, observation_table, ConditioningSpec, KushnerFilter, SimplexTrajectory};
use crate::models::{LatentScenario, ObservationModel, ScoreModel};
use crate::sde::{purpose, RandomStream, SamplePath, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMethod {
    /// Measurement process coupled to its own Kushner filter; never sees the latent.
    JointSystem,
    /// Latent drawn up front, then the observation SDE driven by it.
    BridgeWithKnownLatent,
    /// Euler–Maruyama on the score-form generative drift.
    BackwardScore,
    /// [`SamplerMethod::BackwardScore`] followed by Langevin corrector steps.
    PredictorCorrector,
}

/// How the Langevin step size is derived from the signal-to-noise ratio `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectorStep {
    /// `delta = 2 r^2 sigma^2(T - t)`: the SNR rule with both norms replaced
    /// by their pure-noise values. Independent of the state, so the exact
    /// score leaves the marginal invariant up to `O(delta^2)`.
    #[default]
    NoiseLevel,
    /// `delta = 2 (r |z| / |s(y)|)^2` from the norms of the current path,
    /// capped at `sigma^2(T - t)`. The state dependence inflates the
    /// per-coordinate variance by about `8 r^2 / (N - 2)` per step, which is
    /// only negligible in high dimension.
    PathNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    #[serde(default = "default_corrector_steps")]
    pub corrector_steps: usize,
    #[serde(default = "default_snr")]
    pub snr: f64,
    #[serde(default)]
    pub step_rule: CorrectorStep,
}

fn default_corrector_steps() -> usize {
    1
}

fn default_snr() -> f64 {
    0.06
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: SamplerMethod::PredictorCorrector,
            corrector_steps: 1,
            snr: 0.06,
            step_rule: CorrectorStep::NoiseLevel,
        }
    }
}

impl SamplerConfig {
    pub fn backward() -> Self {
        SamplerConfig { method: SamplerMethod::BackwardScore, corrector_steps: 0, ..Default::default() }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            out.push(format!("corrector snr must be > 0, got {}", self.snr));
        }
        out
    }
}

/// State of one generative trajectory. The filter is present only for the
/// joint system and the rendering only for the known-latent bridge.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub y: Vec<f64>,
    filter: Option<KushnerFilter>,
    latent: Option<Vec<f64>>,
}

impl SamplerState {
    pub fn posterior(&self) -> Option<&[f64]> {
        self.filter.as_ref().map(|f| f.posterior())
    }

    pub fn latent(&self) -> Option<&[f64]> {
        self.latent.as_deref()
    }

    pub fn clip_events(&self) -> usize {
        self.filter.as_ref().map_or(0, |f| f.clip_events())
    }
}

/// Noise sources consumed while advancing a state: the Brownian increments
/// and, for the corrector, the Langevin noise.
pub struct SamplerNoise {
    increments: ChaCha8Rng,
    corrector: ChaCha8Rng,
}

impl SamplerNoise {
    pub fn new(stream: RandomStream) -> Self {
        SamplerNoise {
            increments: stream.derive(purpose::INCREMENTS).rng(),
            corrector: stream.derive(purpose::CORRECTOR).rng(),
        }
    }
}

/// A resumable integrator for every generative representation. Forking uses
/// it to continue a trunk state under fresh noise.
#[derive(Debug, Clone)]
pub struct GenerativeSampler<'a> {
    scenario: &'a LatentScenario,
    obs: ObservationModel,
    score: Option<ScoreModel>,
    config: SamplerConfig,
}

impl<'a> GenerativeSampler<'a> {
    pub fn new(scenario: &'a LatentScenario, obs: ObservationModel, config: SamplerConfig) -> Result<Self> {
        if let Some(p) = config.problems().into_iter().next() {
            return Err(Error::InvalidArgument(p));
        }
        let score = match config.method {
            SamplerMethod::BackwardScore | SamplerMethod::PredictorCorrector => {
                let s = obs.schedule().ok_or_else(|| {
                    Error::InvalidArgument("score-based samplers need the linear-bridge observation model".into())
                })?;
                Some(ScoreModel::new(scenario.clone(), *s))
            }
            SamplerMethod::JointSystem => {
                scenario.as_mixture()?;
                None
            }
            SamplerMethod::BridgeWithKnownLatent => None,
        };
        Ok(GenerativeSampler { scenario, obs, score, config })
    }

    pub fn from_score_model(model: &'a ScoreModel, config: SamplerConfig) -> Result<Self> {
        Self::new(model.scenario(), ObservationModel::LinearBridge(*model.schedule()), config)
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn observation(&self) -> &ObservationModel {
        &self.obs
    }

    pub fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if let Some(s) = self.obs.schedule() {
            if (s.horizon - grid.horizon()).abs() > 1e-12 * s.horizon {
                return Err(Error::InvalidGrid(format!(
                    "grid horizon {} differs from schedule horizon {}",
                    grid.horizon(),
                    s.horizon
                )));
            }
            check_step_ratio(s, grid)?;
        }
        Ok(())
    }

    /// Draws `Y_0`: a prior rendering pushed through the initial law. The
    /// joint system keeps only `Y_0` and conditions its filter on it.
    pub fn initial_state(&self, stream: RandomStream) -> Result<SamplerState> {
        let v = self.scenario.sample_rendering(&mut stream.derive(purpose::LATENT).rng());
        let y = self.obs.initial_law(&v).sample(&mut stream.derive(purpose::INITIAL).rng());
        let mut state = SamplerState { y, filter: None, latent: None };
        match self.config.method {
            SamplerMethod::JointSystem => {
                let m = self.scenario.as_mixture()?;
                state.filter = Some(KushnerFilter::new(m, &self.obs, &ConditioningSpec::MeasurementsOnly, &state.y)?);
            }
            SamplerMethod::BridgeWithKnownLatent => state.latent = Some(v),
            _ => {}
        }
        Ok(state)
    }

    /// Advances `state` from grid index `from` to `to`.
    pub fn advance(&self, state: &mut SamplerState, grid: &TimeGrid, from: usize, to: usize, noise: &mut SamplerNoise) -> Result<()> {
        self.advance_with(state, grid, from, to, noise, |_, _| {})
    }

    fn advance_with<F>(
        &self,
        state: &mut SamplerState,
        grid: &TimeGrid,
        from: usize,
        to: usize,
        noise: &mut SamplerNoise,
        mut record: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &SamplerState),
    {
        let n = state.y.len();
        let mut a = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut table = match self.scenario {
            LatentScenario::Mixture(m) if state.filter.is_some() => vec![0.0; m.len() * n],
            _ => Vec::new(),
        };
        for i in from..to {
            let t = grid.t(i);
            let dt = grid.dt(i);
            self.drift(state, t, &mut a, &mut table)?;
            let sd = dt.sqrt();
            for ((d, ai), y) in dy.iter_mut().zip(&a).zip(state.y.iter_mut()) {
                let z: f64 = noise.increments.sample(StandardNormal);
                *d = ai * dt + sd * z;
                *y += *d;
            }
            if let Some(f) = state.filter.as_mut() {
                f.update(&table, &dy, dt)?;
            }
            if self.config.method == SamplerMethod::PredictorCorrector {
                self.correct(&mut state.y, grid.t(i + 1), &mut noise.corrector)?;
            }
            if state.y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteDrift { t, state: state.y.clone() });
            }
            record(i + 1, state);
        }
        Ok(())
    }

    fn drift(&self, state: &SamplerState, t: f64, out: &mut [f64], table: &mut [f64]) -> Result<()> {
        match self.config.method {
            SamplerMethod::JointSystem => {
                let m = self.scenario.as_mixture()?;
                observation_table(m, &self.obs, &state.y, t, table)?;
                observation_mean(state.posterior().unwrap_or(&[]), table, out);
            }
            SamplerMethod::BridgeWithKnownLatent => {
                let v = state.latent.as_deref().unwrap_or(&[]);
                self.obs.at(t)?.eval(&state.y, v, out);
            }
            SamplerMethod::BackwardScore | SamplerMethod::PredictorCorrector => {
                let d = self.score_model().score_form_drift(&state.y, t)?;
                out.copy_from_slice(&d);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDrift { t, state: state.y.clone() });
        }
        Ok(())
    }

    fn score_model(&self) -> &ScoreModel {
        self.score.as_ref().expect("score samplers always carry a score model")
    }

    /// Langevin steps `y += delta s + sqrt(2 delta) z`; see [`CorrectorStep`]
    /// for `delta`. The path-norm step is capped at `sigma^2(T - t)`: the
    /// marginal is a Gaussian smoothing at that variance, so its negative
    /// log-density has curvature at most `1 / sigma^2` and the capped step
    /// cannot expand. A vanishing score skips the step but still consumes
    /// its noise draw.
    fn correct(&self, y: &mut [f64], t: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let model = self.score_model();
        let sigma2 = model.schedule().noise_variance(model.schedule().horizon - t);
        let r = self.config.snr;
        let mut z = vec![0.0; y.len()];
        for _ in 0..self.config.corrector_steps {
            let s = model.score(y, t, None)?;
            z.iter_mut().for_each(|zi| *zi = rng.sample(StandardNormal));
            let sn = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if sn == 0.0 {
                continue;
            }
            let delta = match self.config.step_rule {
                CorrectorStep::NoiseLevel => 2.0 * r * r * sigma2,
                CorrectorStep::PathNorms => {
                    let zn = z.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (2.0 * (r * zn / sn).powi(2)).min(sigma2)
                }
            };
            let c = (2.0 * delta).sqrt();
            for ((yi, si), zi) in y.iter_mut().zip(&s).zip(&z) {
                *yi += delta * si + c * zi;
            }
        }
        Ok(())
    }

    /// Full trajectory on `grid`, with the filter trajectory for the joint
    /// system.
    pub fn run(&self, grid: &TimeGrid, stream: RandomStream) -> Result<(SamplePath, Option<SimplexTrajectory>, usize)> {
        self.check_grid(grid)?;
        let mut state = self.initial_state(stream)?;
        let mut noise = SamplerNoise::new(stream);
        let n = state.y.len();
        let mut values = Vec::with_capacity(grid.len() * n);
        values.extend_from_slice(&state.y);
        let mut pis = state.posterior().map(|p| {
            let mut tr = SimplexTrajectory::with_capacity(p.len(), grid.len());
            tr.push(p);
            tr
        });
        self.advance_with(&mut state, grid, 0, grid.steps(), &mut noise, |_, s| {
            values.extend_from_slice(&s.y);
            if let (Some(tr), Some(p)) = (pis.as_mut(), s.posterior()) {
                tr.push(p);
            }
        })?;
        let clips = state.clip_events();
        Ok((SamplePath::new(grid.clone(), n, values)?, pis, clips))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianLatent, Mixture, Schedule};
    use crate::sde::{make_grid, Spacing};

    #[test]
    fn config_roundtrip_and_defaults() {
        let c: SamplerConfig = serde_json::from_str(r#"{"method":"predictor-corrector"}"#).unwrap();
        assert_eq!(c, SamplerConfig::default());
        let bad = SamplerConfig { snr: 0.0, ..Default::default() };
        assert_eq!(bad.problems().len(), 1);
    }

    #[test]
    fn score_samplers_require_bridge_observation() {
        let m = Mixture::new(vec![1.0], vec![vec![0.0]], vec![]).unwrap();
        let sc = LatentScenario::Mixture(m);
        assert!(GenerativeSampler::new(&sc, ObservationModel::Static, SamplerConfig::backward()).is_err());
        let g = LatentScenario::Gaussian(GaussianLatent::new(vec![0.0], 1.0).unwrap());
        let joint = SamplerConfig { method: SamplerMethod::JointSystem, ..Default::default() };
        assert!(GenerativeSampler::new(&g, ObservationModel::Static, joint).is_err());
    }

    #[test]
    fn identical_streams_identical_paths() {
        let m = Mixture::new(vec![0.3, 0.7], vec![vec![-1.0, 0.5], vec![1.0, 0.0]], vec![]).unwrap();
        let sc = LatentScenario::Mixture(m);
        let obs = ObservationModel::LinearBridge(Schedule::new(1.0, 1.0).unwrap());
        let grid = make_grid(1.0, 200, 1e-2, Spacing::refined()).unwrap();
        for method in [
            SamplerMethod::JointSystem,
            SamplerMethod::BridgeWithKnownLatent,
            SamplerMethod::BackwardScore,
            SamplerMethod::PredictorCorrector,
        ] {
            let s = GenerativeSampler::new(&sc, obs.clone(), SamplerConfig { method, ..Default::default() }).unwrap();
            let a = s.run(&grid, RandomStream::new(4, 2)).unwrap().0;
            let b = s.run(&grid, RandomStream::new(4, 2)).unwrap().0;
            let c = s.run(&grid, RandomStream::new(4, 3)).unwrap().0;
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn split_advance_equals_single_run() {
        let m = Mixture::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![]).unwrap();
        let sc = LatentScenario::Mixture(m);
        let obs = ObservationModel::LinearBridge(Schedule::brownian(1.0));
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let s = GenerativeSampler::new(&sc, obs, SamplerConfig::default()).unwrap();
        let stream = RandomStream::new(9, 0);
        let full = s.run(&grid, stream).unwrap().0;
        let mut st = s.initial_state(stream).unwrap();
        let mut noise = SamplerNoise::new(stream);
        s.advance(&mut st, &grid, 0, 40, &mut noise).unwrap();
        s.advance(&mut st, &grid, 40, 100, &mut noise).unwrap();
        assert_eq!(st.y.as_slice(), full.terminal());
    }
}
