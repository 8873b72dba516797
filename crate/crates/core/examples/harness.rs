//! Runs a batch experiment from a JSON document and prints the manifest,
//! as the `latentfilter run` command does.
//!
//! cargo run --release --example harness

use latentfilter::harness::{run, ExperimentConfig, RunOptions};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_value(&json!({
        "schema_version": 1,
        "experiment": "bridge-check",
        "seed": 5,
        "scenario": {"builtin": "binary"},
        // geometric refinement near the horizon keeps the Euler steps small
        // where the bridge drift is stiff
        "grid": {"spacing": "refined"},
        "mc": {"n_paths": 500},
        "rows": 21
    }))?;
    let out = std::env::temp_dir().join("latentfilter-example");
    let manifest = run(&config, &out, RunOptions::default())?;
    println!("wrote {} files to {}", manifest.outputs.len(), out.display());
    for o in &manifest.outputs {
        println!("  {:<24} {:>8} bytes  {}", o.file, o.bytes, &o.sha256[..16]);
    }
    println!("{}", std::fs::read_to_string(out.join("bridge_terminal.csv"))?);
    Ok(())
}
