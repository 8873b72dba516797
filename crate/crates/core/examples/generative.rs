//! Four ways to draw from a 2-D mixture with the linear bridge: the joint
//! measurement/filter system, the bridge with a known latent, the backward
//! score SDE and the predictor-corrector sampler. Terminal states are
//! classified by their nearest rendering.
//!
//! cargo run --release --example generative

use latentfilter::generative::{nearest_rendering, GenerativeSampler, SamplerConfig, SamplerMethod};
use latentfilter::models::{LatentScenario, Mixture, ObservationModel, Schedule};
use latentfilter::sde::{make_grid, RandomStream, Spacing};

fn main() -> latentfilter::Result<()> {
    let mixture = Mixture::new(
        vec![0.1, 0.2, 0.3, 0.4],
        vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]],
        vec![],
    )?;
    let scenario = LatentScenario::Mixture(mixture.clone());
    let obs = ObservationModel::LinearBridge(Schedule::new(1.0, 1.0)?);
    let grid = make_grid(1.0, 1000, 1e-3, Spacing::refined())?;
    let n = 2000;

    println!("prior weights       {:?}", mixture.weights());
    for method in [
        SamplerMethod::JointSystem,
        SamplerMethod::BridgeWithKnownLatent,
        SamplerMethod::BackwardScore,
        SamplerMethod::PredictorCorrector,
    ] {
        let config = SamplerConfig { method, ..Default::default() };
        let sampler = GenerativeSampler::new(&scenario, obs.clone(), config)?;
        let mut counts = [0usize; 4];
        for i in 0..n {
            let (path, _, _) = sampler.run(&grid, RandomStream::new(11, i as u64))?;
            counts[nearest_rendering(path.terminal(), &mixture)?.component] += 1;
        }
        let freq: Vec<String> = counts.iter().map(|&c| format!("{:.3}", c as f64 / n as f64)).collect();
        println!("{:<19} [{}]", format!("{method:?}"), freq.join(", "));
    }
    Ok(())
}
