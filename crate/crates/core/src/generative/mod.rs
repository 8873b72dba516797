//! Generative representations of the measurement process: the coupled
//! filter/observation system, bridges with a known latent, backward score
//! SDEs with an optional Langevin corrector, and terminal diagnostics.

mod bridge;
mod sampler;
mod terminal;

pub(crate) use bridge::check_step_ratio;
pub use bridge::{deterministic_bridge, sample_initial_state, simulate_bridge, simulate_bridge_from, MAX_STEP_RATIO};
pub use sampler::{CorrectorStep, GenerativeSampler, SamplerConfig, SamplerMethod, SamplerNoise, SamplerState};
pub use terminal::{nearest_rendering, snap_to_nearest, terminal_hitting_report, Hit};

use crate::error::Result;
use crate::filtering::SimplexTrajectory;
use crate::models::{LatentScenario, Mixture, ObservationModel, ScoreModel};
use crate::sde::{RandomStream, SamplePath, TimeGrid};

/// A path of the coupled system together with its filter.
#[derive(Debug, Clone)]
pub struct JointTrajectory {
    pub y_path: SamplePath,
    pub pi_path: SimplexTrajectory,
    pub stream: RandomStream,
    /// Steps on which the Kushner update had to be clipped onto the simplex.
    pub clip_events: usize,
}

/// Simulates `dY = <pi_t, H(Y, ., t)> dt + dW` jointly with the Kushner
/// filter it drives. Only `Y_0` and the measurements enter the loop.
pub fn simulate_joint_system(
    mixture: &Mixture,
    obs: &ObservationModel,
    grid: &TimeGrid,
    stream: RandomStream,
) -> Result<JointTrajectory> {
    let scenario = LatentScenario::Mixture(mixture.clone());
    let config = SamplerConfig { method: SamplerMethod::JointSystem, ..Default::default() };
    let sampler = GenerativeSampler::new(&scenario, obs.clone(), config)?;
    let (y_path, pi, clip_events) = sampler.run(grid, stream)?;
    let pi_path = pi.expect("joint system records its filter");
    Ok(JointTrajectory { y_path, pi_path, stream, clip_events })
}

/// Euler–Maruyama on the score-form generative drift, started from a prior
/// draw pushed through the forward marginal at reversed time `T`.
pub fn simulate_backward(model: &ScoreModel, grid: &TimeGrid, stream: RandomStream) -> Result<SamplePath> {
    let sampler = GenerativeSampler::from_score_model(model, SamplerConfig::backward())?;
    Ok(sampler.run(grid, stream)?.0)
}

/// [`simulate_backward`] with `config.corrector_steps` Langevin corrections
/// after every predictor step.
pub fn predictor_corrector(model: &ScoreModel, grid: &TimeGrid, stream: RandomStream, config: &SamplerConfig) -> Result<SamplePath> {
    let config = SamplerConfig { method: SamplerMethod::PredictorCorrector, ..*config };
    let sampler = GenerativeSampler::from_score_model(model, config)?;
    Ok(sampler.run(grid, stream)?.0)
}
