//! `I(Y_{0:t}; component)` for a symmetric binary mixture: the
//! filtration-gap and linear-diffusion Monte-Carlo estimators against the
//! quadrature value of `I(Y_t; component)`, then the sufficiency and
//! data-processing checks at three times.
//!
//! cargo run --release --example mutual_information

use latentfilter::information::{dpi_check, mi_general, mi_linear, mi_quadrature_oracle, PluginConfig};
use latentfilter::models::{LatentScenario, Mixture, ObservationModel, Schedule, ScoreModel, Statistic};
use latentfilter::sde::{make_grid, RandomStream, Spacing};

fn main() -> latentfilter::Result<()> {
    let mixture = Mixture::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![])?;
    let schedule = Schedule::new(1.0, 1.0)?;
    let scenario = LatentScenario::Mixture(mixture.clone());
    let obs = ObservationModel::LinearBridge(schedule);
    let grid = make_grid(1.0, 2000, 1e-3, Spacing::Uniform)?;
    let phi = Statistic::Component;
    let root = RandomStream::new(2024, 0);

    let general = mi_general(&scenario, &obs, &grid, &phi, 4000, root.derive(0))?;
    let linear = mi_linear(&ScoreModel::new(scenario.clone(), schedule), &grid, &phi, 4000, root.derive(1))?;

    println!("{:>5}  {:>17}  {:>17}  {:>10}", "t", "filtration gap", "linear", "quadrature");
    for t in [0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
        let (g, gs) = general.at(t);
        let (l, ls) = linear.at(t);
        let q = mi_quadrature_oracle(&mixture, &schedule, t, &phi)?;
        println!("{t:>5.3}  {g:>9.4} ± {gs:.4}  {l:>9.4} ± {ls:.4}  {q:>10.4}");
    }
    println!("ln 2 = {:.4}", 2f64.ln());

    let r = dpi_check(&mixture, &obs, &grid, &phi, 4000, root.derive(2), &[0.3, 0.6, 0.9], &PluginConfig::default())?;
    println!("\n{:>5}  {:>8}  {:>8}  {:>8}", "t", "I(Y)", "I(pi)", "I(<pi,H>)");
    for row in &r.rows {
        println!("{:>5.3}  {:>8.4}  {:>8.4}  {:>8.4}", row.t, row.i_full, row.i_pi, row.i_projection);
    }
    Ok(())
}
