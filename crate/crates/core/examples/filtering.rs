//! One measurement path of a three-component mixture, filtered three ways:
//! the exact Girsanov posterior, the Kushner equation and a particle cloud.
//!
//! cargo run --release --example filtering

use latentfilter::filtering::{
    exact_discrete_filter, kushner_filter, particle_filter, total_variation, ConditioningSpec, MixtureLatent,
    ResamplePolicy,
};
use latentfilter::information::simulate_under_prior;
use latentfilter::models::{LatentScenario, Mixture, ObservationModel, Schedule};
use latentfilter::sde::{make_grid, RandomStream, Spacing};

fn main() -> latentfilter::Result<()> {
    let mixture = Mixture::new(vec![0.3, 0.3, 0.4], vec![vec![-1.5], vec![0.0], vec![1.5]], vec![])?;
    let obs = ObservationModel::LinearBridge(Schedule::new(0.5, 1.0)?);
    let grid = make_grid(1.0, 2000, 1e-2, Spacing::Uniform)?;
    let scenario = LatentScenario::Mixture(mixture.clone());

    let path = simulate_under_prior(&scenario, &obs, &grid, RandomStream::new(42, 0))?;
    println!("latent component: {:?}", path.component);

    let none = ConditioningSpec::MeasurementsOnly;
    let exact = exact_discrete_filter(&path.path, &mixture, &obs, &none)?;
    let kushner = kushner_filter(&path.path, &mixture, &obs, &none)?;
    let record: Vec<usize> = (0..=10).map(|i| i * grid.steps() / 10).collect();
    let latent = MixtureLatent::new(&mixture, &none)?;
    let cloud = particle_filter(&path.path, &latent, &obs, 2000, ResamplePolicy::default(), RandomStream::new(42, 1), &record)?;

    println!("{:>6}  {:>24}  {:>10}  {:>10}", "t", "exact posterior", "TV kushner", "TV cloud");
    for (j, c) in &cloud.snapshots {
        let p = exact.at(*j);
        let tv_k = total_variation(p, kushner.trajectory.at(*j));
        let tv_p = total_variation(p, &c.to_simplex(mixture.len()));
        println!("{:>6.3}  [{:.3}, {:.3}, {:.3}]  {tv_k:>10.2e}  {tv_p:>10.2e}", grid.t(*j), p[0], p[1], p[2]);
    }
    println!("kushner clip events: {}", kushner.clip_events);
    Ok(())
}
