//! Reference scenarios selectable by name from a config file.

use serde_json::{json, Value};

/// A named scenario together with the observation model and grid it is
/// meant to be run on. `document` holds the `scenario`, `observation` and
/// `grid` sections of a config; fields given explicitly in a config take
/// precedence.
#[derive(Debug, Clone)]
pub struct BuiltinScenario {
    pub name: &'static str,
    pub description: &'static str,
    pub document: Value,
}

fn hierarchy_renderings() -> Value {
    // global attribute a moves both coordinates, local attribute b only the first
    let mut r = Vec::new();
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            r.push(json!([2.0 * a + 1.4 * b, 2.0 * a]));
        }
    }
    Value::Array(r)
}

pub fn builtin_scenarios() -> Vec<BuiltinScenario> {
    vec![
        BuiltinScenario {
            name: "binary",
            description: "symmetric two-component mixture at -1 and +1 in 1-D, linear bridge alpha = 1",
            document: json!({
                "scenario": {"kind": "mixture", "weights": [0.5, 0.5], "renderings": [[-1.0], [1.0]]},
                "observation": {"kind": "linear-bridge", "alpha": 1.0},
                "grid": {"horizon": 1.0, "epsilon": 1e-3, "steps": 2000, "spacing": "uniform"}
            }),
        },
        BuiltinScenario {
            name: "triad",
            description: "three unequal components in 1-D, linear bridge alpha = 0.5",
            document: json!({
                "scenario": {"kind": "mixture", "weights": [0.3, 0.3, 0.4], "renderings": [[-1.5], [0.0], [1.5]]},
                "observation": {"kind": "linear-bridge", "alpha": 0.5},
                "grid": {"horizon": 1.0, "epsilon": 1e-2, "steps": 1000, "spacing": "uniform"}
            }),
        },
        BuiltinScenario {
            name: "quad",
            description: "four components on the corners of a square in 2-D with row and column attributes",
            document: json!({
                "scenario": {
                    "kind": "mixture",
                    "weights": [0.1, 0.2, 0.3, 0.4],
                    "renderings": [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]],
                    "attributes": [
                        {"name": "column", "labels": [0, 1, 0, 1]},
                        {"name": "row", "labels": [0, 0, 1, 1]}
                    ]
                },
                "observation": {"kind": "linear-bridge", "alpha": 1.0},
                "grid": {"horizon": 1.0, "epsilon": 1e-3, "steps": 1000, "spacing": "refined"}
            }),
        },
        BuiltinScenario {
            name: "hierarchy",
            description: "two binary attributes in 2-D: a global one with large separation, a local one moving a single coordinate",
            document: json!({
                "scenario": {
                    "kind": "mixture",
                    "weights": [0.25, 0.25, 0.25, 0.25],
                    "renderings": hierarchy_renderings(),
                    "attributes": [
                        {"name": "global", "labels": [0, 0, 1, 1]},
                        {"name": "local", "labels": [0, 1, 0, 1]}
                    ]
                },
                "observation": {"kind": "linear-bridge", "alpha": 1.0},
                "grid": {"horizon": 4.5, "epsilon": 1e-3, "steps": 1000, "spacing": "refined"}
            }),
        },
        BuiltinScenario {
            name: "gaussian-static",
            description: "standard normal latent observed through dY = X dt + dW up to t = 1",
            document: json!({
                "scenario": {"kind": "gaussian", "mean": [0.0], "variance": 1.0},
                "observation": {"kind": "static"},
                "grid": {"horizon": 1.001, "epsilon": 1e-3, "steps": 1000, "spacing": "uniform"}
            }),
        },
        BuiltinScenario {
            name: "gaussian-bridge",
            description: "standard normal latent in 4-D rendered through the linear bridge, alpha = 1",
            document: json!({
                "scenario": {"kind": "gaussian", "mean": [0.0, 0.0, 0.0, 0.0], "variance": 1.0},
                "observation": {"kind": "linear-bridge", "alpha": 1.0},
                "grid": {"horizon": 1.0, "epsilon": 1e-3, "steps": 1000, "spacing": "uniform"}
            }),
        },
    ]
}

pub fn builtin(name: &str) -> Option<BuiltinScenario> {
    builtin_scenarios().into_iter().find(|b| b.name == name)
}
