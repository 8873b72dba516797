//! Static observation `dY = X dt + dW` of a standard normal latent. The
//! Kalman-Bucy filter is exact here; a particle filter should track it.
//!
//! cargo run --release --example kalman

use latentfilter::filtering::{kalman_bucy, particle_filter, ResamplePolicy};
use latentfilter::information::simulate_under_prior;
use latentfilter::models::{GaussianLatent, LatentScenario, ObservationModel};
use latentfilter::sde::{make_grid, RandomStream, Spacing};

fn main() -> latentfilter::Result<()> {
    let prior = GaussianLatent { mean: vec![0.0], variance: 1.0 };
    let scenario = LatentScenario::Gaussian(prior.clone());
    let obs = ObservationModel::Static;
    let grid = make_grid(1.001, 1000, 1e-3, Spacing::Uniform)?;

    let path = simulate_under_prior(&scenario, &obs, &grid, RandomStream::new(7, 0))?;
    let kb = kalman_bucy(&path.path, &prior.mean, prior.variance)?;
    let pf = particle_filter(&path.path, &prior, &obs, 10_000, ResamplePolicy::default(), RandomStream::new(7, 1), &[])?;

    println!("true latent {:.4}", path.latent[0]);
    println!("{:>6}  {:>9} {:>9}  {:>9} {:>9}", "t", "kb mean", "pf mean", "kb var", "pf var");
    for j in (0..grid.len()).step_by(100) {
        println!(
            "{:>6.3}  {:>9.4} {:>9.4}  {:>9.5} {:>9.5}",
            grid.t(j),
            kb.means[j][0],
            pf.means[j][0],
            kb.variances[j],
            pf.variances[j][0]
        );
    }
    Ok(())
}
