//! Forking on the two-attribute hierarchy: trunks run to a fork time, then
//! 100 forks each continue to the end. The entropy of the fork labels drops
//! to zero for the coarse attribute before the fine one.
//!
//! cargo run --release --example forking

use latentfilter::forking::{run_forking, ForkConfig};
use latentfilter::harness::ExperimentConfig;
use latentfilter::models::ScoreModel;
use latentfilter::sde::RandomStream;
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // borrow the built-in scenario, observation and grid
    let c = ExperimentConfig::from_value(&json!({
        "schema_version": 1, "experiment": "fork", "scenario": {"builtin": "hierarchy"}
    }))?;
    let grid = c.grid.build()?;
    let model = ScoreModel::new(c.scenario.clone(), c.schedule().expect("bridge observation"));
    let config = ForkConfig { attributes: vec!["global".into(), "local".into()], ..Default::default() };
    let report = run_forking(&model, &config, &grid, RandomStream::new(1, 0))?;

    println!("{:>6}  {:>8}  {:>8}", "tau", "global", "local");
    let (g, l) = (report.curve("global"), report.curve("local"));
    for (a, b) in g.iter().zip(&l) {
        println!("{:>6.3}  {:>8.4}  {:>8.4}", a.tau, a.mean_entropy, b.mean_entropy);
    }
    for name in ["global", "local"] {
        println!("{name}: entropy halves at tau = {:?}", report.half_entropy_crossing(name));
    }
    Ok(())
}
