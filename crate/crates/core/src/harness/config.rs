//! Experiment configuration: a single JSON document with a versioned schema.
//!
//! Parsing walks the document by hand so that every schema violation is
//! reported at once, each prefixed with the path of the offending field.

use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::scenarios::builtin;
use crate::generative::SamplerConfig;
use crate::models::{
    Attribute, GaussianLatent, LatentScenario, Mixture, ObservationModel, Schedule, Statistic, StatisticValues,
    COMPONENT_ATTRIBUTE,
};
use crate::sde::{make_grid, Spacing, TimeGrid};

pub const SCHEMA_VERSION: u64 = 1;

/// Every problem found in a config document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration problem(s):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    FilterBench,
    MiCurve,
    Fork,
    BridgeCheck,
    JointVsBridge,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::FilterBench,
        Experiment::MiCurve,
        Experiment::Fork,
        Experiment::BridgeCheck,
        Experiment::JointVsBridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FilterBench => "filter-bench",
            Experiment::MiCurve => "mi-curve",
            Experiment::Fork => "fork",
            Experiment::BridgeCheck => "bridge-check",
            Experiment::JointVsBridge => "joint-vs-bridge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationSpec {
    LinearBridge { alpha: f64 },
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub horizon: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn build(&self) -> crate::Result<TimeGrid> {
        make_grid(self.horizon, self.steps, self.epsilon, self.spacing)
    }
}

/// Monte Carlo sizes. Every experiment reads the subset it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSizes {
    pub n_paths: usize,
    /// Particle filter size in filter-bench; 0 skips the particle filter.
    pub n_particles: usize,
    pub k: usize,
    pub n_seeds: usize,
    pub bins: usize,
    pub bootstrap: usize,
}

impl Default for McSizes {
    fn default() -> Self {
        McSizes { n_paths: 1000, n_particles: 1000, k: 100, n_seeds: 10, bins: 20, bootstrap: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub scenario: LatentScenario,
    pub observation: ObservationSpec,
    pub grid: GridSpec,
    pub sampler: SamplerConfig,
    pub mc: McSizes,
    pub statistics: Vec<Statistic>,
    pub tau_list: Vec<f64>,
    pub dpi_times: Vec<f64>,
    pub oracle_times: Vec<f64>,
    pub strides: Vec<usize>,
    /// Maximum number of time points written per curve.
    pub rows: usize,
}

const TOP_KEYS: [&str; 15] = [
    "schema_version",
    "experiment",
    "seed",
    "output_dir",
    "scenario",
    "observation",
    "grid",
    "sampler",
    "mc",
    "statistics",
    "tau_list",
    "dpi_times",
    "oracle_times",
    "strides",
    "rows",
];

struct Checker {
    problems: Vec<String>,
}

impl Checker {
    fn err(&mut self, path: &str, msg: impl fmt::Display) {
        self.problems.push(format!("{path}: {msg}"));
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        let o = v.as_object();
        if o.is_none() {
            self.err(path, "expected an object");
        }
        o
    }

    fn known_keys(&mut self, m: &Map<String, Value>, path: &str, allowed: &[&str]) {
        for k in m.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(&join(path, k), "unknown field");
            }
        }
    }

    fn required<'a>(&mut self, m: &'a Map<String, Value>, path: &str, key: &str) -> Option<&'a Value> {
        let v = m.get(key);
        if v.is_none() {
            self.err(&join(path, key), "missing required field");
        }
        v
    }

    fn num(&mut self, v: &Value, path: &str) -> Option<f64> {
        let x = v.as_f64();
        if x.is_none() {
            self.err(path, "expected a number");
        }
        x
    }

    fn uint(&mut self, v: &Value, path: &str) -> Option<u64> {
        let x = v.as_u64();
        if x.is_none() {
            self.err(path, "expected a non-negative integer");
        }
        x
    }

    fn string<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a str> {
        let x = v.as_str();
        if x.is_none() {
            self.err(path, "expected a string");
        }
        x
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        let x = v.as_array();
        if x.is_none() {
            self.err(path, "expected an array");
        }
        x
    }

    fn num_array(&mut self, v: &Value, path: &str) -> Option<Vec<f64>> {
        let a = self.array(v, path)?;
        let out: Vec<Option<f64>> = a.iter().enumerate().map(|(i, x)| self.num(x, &format!("{path}[{i}]"))).collect();
        out.into_iter().collect()
    }

    fn uint_array(&mut self, v: &Value, path: &str) -> Option<Vec<u64>> {
        let a = self.array(v, path)?;
        let out: Vec<Option<u64>> = a.iter().enumerate().map(|(i, x)| self.uint(x, &format!("{path}[{i}]"))).collect();
        out.into_iter().collect()
    }

    fn opt<T>(&mut self, m: &Map<String, Value>, path: &str, key: &str, f: impl FnOnce(&mut Self, &Value, &str) -> Option<T>) -> Option<Option<T>> {
        match m.get(key) {
            None => Some(None),
            Some(v) => f(self, v, &join(path, key)).map(Some),
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Recursively overlays `over` on `base`.
fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Replaces a `{"builtin": name}` scenario by the built-in document, with
/// the config's own `observation` and `grid` fields taking precedence.
fn resolve_builtin(doc: &Value, ck: &mut Checker) -> Value {
    let name = doc.get("scenario").and_then(|s| s.get("builtin"));
    let Some(name) = name else { return doc.clone() };
    let Some(name) = name.as_str() else {
        ck.err("scenario.builtin", "expected a string");
        return doc.clone();
    };
    if let Some(extra) = doc["scenario"].as_object().and_then(|m| m.keys().find(|k| *k != "builtin")) {
        ck.err(&format!("scenario.{extra}"), "not allowed together with `builtin`");
    }
    let Some(b) = builtin(name) else {
        ck.err("scenario.builtin", format!("unknown scenario `{name}` (see `scenarios list`)"));
        return doc.clone();
    };
    let mut out = doc.clone();
    out["scenario"] = b.document["scenario"].clone();
    for section in ["observation", "grid"] {
        let mut base = b.document[section].clone();
        if let Some(v) = doc.get(section) {
            // a different observation kind replaces the section wholesale
            if v.get("kind").is_some_and(|k| Some(k) != base.get("kind")) {
                base = Value::Object(Map::new());
            }
            merge(&mut base, v);
        }
        out[section] = base;
    }
    out
}

/// `known` receives the attribute list of a mixture even when other parts
/// of the scenario are broken, so statistics can still be checked.
fn parse_scenario(v: &Value, ck: &mut Checker, known: &mut Option<Vec<Attribute>>) -> Option<LatentScenario> {
    let m = ck.object(v, "scenario")?;
    let kind = ck.required(m, "scenario", "kind").and_then(|k| ck.string(k, "scenario.kind"))?;
    match kind {
        "mixture" => {
            ck.known_keys(m, "scenario", &["kind", "weights", "renderings", "attributes"]);
            let weights = ck.required(m, "scenario", "weights").and_then(|w| ck.num_array(w, "scenario.weights"));
            let renderings = ck.required(m, "scenario", "renderings").and_then(|r| {
                let a = ck.array(r, "scenario.renderings")?;
                let rows: Vec<Option<Vec<f64>>> =
                    a.iter().enumerate().map(|(i, x)| ck.num_array(x, &format!("scenario.renderings[{i}]"))).collect();
                rows.into_iter().collect::<Option<Vec<_>>>()
            });
            let attributes = ck.opt(m, "scenario", "attributes", |ck, v, path| {
                let a = ck.array(v, path)?;
                let out: Vec<Option<Attribute>> =
                    a.iter().enumerate().map(|(i, x)| parse_attribute(x, &format!("{path}[{i}]"), ck)).collect();
                out.into_iter().collect::<Option<Vec<_>>>()
            });
            let attributes = attributes.flatten().unwrap_or_default();
            *known = Some(attributes.clone());
            match (weights, renderings) {
                (Some(weights), Some(renderings)) => {
                    let mixture = Mixture::unchecked(weights, renderings, attributes);
                    for p in mixture.problems() {
                        ck.err("scenario", p);
                    }
                    Some(LatentScenario::Mixture(mixture))
                }
                (weights, renderings) => {
                    // still check what can be checked without the missing part
                    let k = weights.map(|w| w.len()).or(renderings.map(|r| r.len()));
                    let m = Mixture::unchecked(vec![1.0; k.unwrap_or(0)], Vec::new(), attributes);
                    for p in m.problems().into_iter().filter(|p| p.starts_with("attributes")) {
                        ck.err("scenario", p);
                    }
                    None
                }
            }
        }
        "gaussian" => {
            ck.known_keys(m, "scenario", &["kind", "mean", "variance"]);
            let mean = ck.required(m, "scenario", "mean").and_then(|x| ck.num_array(x, "scenario.mean"));
            let variance = ck.required(m, "scenario", "variance").and_then(|x| ck.num(x, "scenario.variance"));
            let g = GaussianLatent { mean: mean?, variance: variance? };
            let s = LatentScenario::Gaussian(g);
            for p in s.validate() {
                ck.err("scenario", p);
            }
            Some(s)
        }
        other => {
            ck.err("scenario.kind", format!("expected `mixture` or `gaussian`, got `{other}`"));
            None
        }
    }
}

fn parse_attribute(v: &Value, path: &str, ck: &mut Checker) -> Option<Attribute> {
    let m = ck.object(v, path)?;
    ck.known_keys(m, path, &["name", "labels", "vectors"]);
    let name = ck.required(m, path, "name").and_then(|n| ck.string(n, &join(path, "name")));
    let values = match (m.get("labels"), m.get("vectors")) {
        (Some(l), None) => {
            let l = ck.uint_array(l, &join(path, "labels"))?;
            let fits = l.iter().all(|&x| x <= u32::MAX as u64);
            if !fits {
                ck.err(&join(path, "labels"), "labels must fit in 32 bits");
            }
            Some(StatisticValues::Labels(l.into_iter().map(|x| x as u32).collect()))
        }
        (None, Some(vs)) => {
            let a = ck.array(vs, &join(path, "vectors"))?;
            let rows: Vec<Option<Vec<f64>>> =
                a.iter().enumerate().map(|(i, x)| ck.num_array(x, &format!("{path}.vectors[{i}]"))).collect();
            rows.into_iter().collect::<Option<Vec<_>>>().map(StatisticValues::Vectors)
        }
        _ => {
            ck.err(path, "exactly one of `labels` or `vectors` is required");
            None
        }
    };
    Some(Attribute { name: name?.to_string(), values: values? })
}

fn parse_observation(v: &Value, ck: &mut Checker) -> Option<ObservationSpec> {
    let m = ck.object(v, "observation")?;
    let kind = ck.required(m, "observation", "kind").and_then(|k| ck.string(k, "observation.kind"))?;
    match kind {
        "linear-bridge" => {
            ck.known_keys(m, "observation", &["kind", "alpha"]);
            let alpha = ck.required(m, "observation", "alpha").and_then(|a| ck.num(a, "observation.alpha"))?;
            if !(alpha >= 0.0 && alpha.is_finite()) {
                ck.err("observation.alpha", format!("must be finite and >= 0, got {alpha}"));
            }
            Some(ObservationSpec::LinearBridge { alpha })
        }
        "static" => {
            ck.known_keys(m, "observation", &["kind"]);
            Some(ObservationSpec::Static)
        }
        other => {
            ck.err("observation.kind", format!("expected `linear-bridge` or `static`, got `{other}`"));
            None
        }
    }
}

fn parse_grid(v: &Value, ck: &mut Checker) -> Option<GridSpec> {
    let m = ck.object(v, "grid")?;
    ck.known_keys(m, "grid", &["horizon", "epsilon", "steps", "spacing", "refined_fraction"]);
    let horizon = ck.required(m, "grid", "horizon").and_then(|x| ck.num(x, "grid.horizon"));
    let epsilon = ck.required(m, "grid", "epsilon").and_then(|x| ck.num(x, "grid.epsilon"));
    let steps = ck.required(m, "grid", "steps").and_then(|x| ck.uint(x, "grid.steps"));
    let spacing = ck.opt(m, "grid", "spacing", |ck, v, p| ck.string(v, p).map(str::to_string));
    let fraction = ck.opt(m, "grid", "refined_fraction", |ck, v, p| ck.num(v, p));
    let spacing = match (spacing?.as_deref(), fraction?) {
        (None | Some("uniform"), None) => Some(Spacing::Uniform),
        (None | Some("uniform"), Some(_)) => {
            ck.err("grid.refined_fraction", "only allowed with `\"spacing\": \"refined\"`");
            None
        }
        (Some("refined"), f) => Some(Spacing::GeometricRefined { fraction: f.unwrap_or(0.5) }),
        (Some(other), _) => {
            ck.err("grid.spacing", format!("expected `uniform` or `refined`, got `{other}`"));
            None
        }
    };
    let g = GridSpec { horizon: horizon?, epsilon: epsilon?, steps: steps? as usize, spacing: spacing? };
    if let Err(e) = g.build() {
        ck.err("grid", e);
    }
    Some(g)
}

fn parse_mc(v: Option<&Value>, ck: &mut Checker) -> Option<McSizes> {
    let mut mc = McSizes::default();
    let Some(v) = v else { return Some(mc) };
    let m = ck.object(v, "mc")?;
    let fields = ["n_paths", "n_particles", "k", "n_seeds", "bins", "bootstrap"];
    ck.known_keys(m, "mc", &fields);
    for key in fields {
        let Some(x) = m.get(key) else { continue };
        let path = join("mc", key);
        let Some(x) = ck.uint(x, &path) else { continue };
        let min = match key {
            "n_particles" => 0,
            "k" | "bins" => 2,
            _ => 1,
        };
        if x < min {
            ck.err(&path, format!("must be >= {min}, got {x}"));
        }
        let x = x as usize;
        match key {
            "n_paths" => mc.n_paths = x,
            "n_particles" => mc.n_particles = x,
            "k" => mc.k = x,
            "n_seeds" => mc.n_seeds = x,
            "bins" => mc.bins = x,
            _ => mc.bootstrap = x,
        }
    }
    Some(mc)
}

fn parse_statistic(
    name: &str,
    scenario: Option<&LatentScenario>,
    known: Option<&[Attribute]>,
    path: &str,
    ck: &mut Checker,
) -> Statistic {
    let s = match name {
        COMPONENT_ATTRIBUTE => Statistic::Component,
        "constant" => Statistic::Constant,
        "full-latent" => Statistic::FullLatent,
        other => Statistic::Attribute(other.to_string()),
    };
    match (scenario, &s) {
        (Some(LatentScenario::Mixture(_)) | None, Statistic::Attribute(a)) if known.is_some() => {
            match known.unwrap_or_default().iter().find(|x| x.name == *a) {
                None => ck.err(path, format!("unknown attribute `{a}`")),
                Some(attr) if matches!(attr.values, StatisticValues::Vectors(_)) => {
                    ck.err(path, format!("attribute `{a}` has vector values; a discrete attribute is required"))
                }
                Some(_) => {}
            }
        }
        (Some(LatentScenario::Gaussian(_)), Statistic::Attribute(a)) => {
            ck.err(path, format!("unknown attribute `{a}`: Gaussian scenarios support `full-latent` and `constant`"))
        }
        (Some(LatentScenario::Gaussian(_)), Statistic::Component) => {
            ck.err(path, "`component` needs a mixture scenario")
        }
        _ => {}
    }
    s
}

fn statistic_name(s: &Statistic) -> String {
    match s {
        Statistic::Constant => "constant".into(),
        Statistic::Component => COMPONENT_ATTRIBUTE.into(),
        Statistic::FullLatent => "full-latent".into(),
        Statistic::Attribute(a) => a.clone(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { problems: vec![format!("{}: cannot read: {e}", path.display())] })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError { problems: vec![format!("not valid JSON: {e}")] })?;
        Self::from_value(&v)
    }

    pub fn from_value(doc: &Value) -> Result<Self, ConfigError> {
        let mut ck = Checker { problems: Vec::new() };
        let doc = resolve_builtin(doc, &mut ck);
        let Some(top) = ck.object(&doc, "config") else {
            return Err(ConfigError { problems: ck.problems });
        };
        ck.known_keys(top, "", &TOP_KEYS);
        match ck.required(top, "", "schema_version").and_then(|v| ck.uint(v, "schema_version")) {
            Some(SCHEMA_VERSION) | None => {}
            Some(v) => ck.err("schema_version", format!("unsupported version {v}, expected {SCHEMA_VERSION}")),
        }
        let experiment = ck.required(top, "", "experiment").and_then(|v| ck.string(v, "experiment")).and_then(|s| {
            let e = Experiment::parse(s);
            if e.is_none() {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                ck.err("experiment", format!("unknown experiment `{s}`, expected one of {}", names.join(", ")));
            }
            e
        });
        let seed = ck.opt(top, "", "seed", |ck, v, p| ck.uint(v, p)).map(|s| s.unwrap_or(0));
        let output_dir = ck.opt(top, "", "output_dir", |ck, v, p| ck.string(v, p).map(str::to_string));
        let mut known = None;
        let scenario = ck.required(top, "", "scenario").and_then(|v| parse_scenario(v, &mut ck, &mut known));
        let observation = ck.required(top, "", "observation").and_then(|v| parse_observation(v, &mut ck));
        let grid = ck.required(top, "", "grid").and_then(|v| parse_grid(v, &mut ck));
        let mc = parse_mc(top.get("mc"), &mut ck);
        let sampler = match top.get("sampler") {
            None => Some(match experiment {
                Some(Experiment::Fork) => SamplerConfig::backward(),
                _ => SamplerConfig::default(),
            }),
            Some(v) => match serde_json::from_value::<SamplerConfig>(v.clone()) {
                Ok(s) => {
                    for p in s.problems() {
                        ck.err("sampler", p);
                    }
                    Some(s)
                }
                Err(e) => {
                    ck.err("sampler", e);
                    None
                }
            },
        };
        let statistics = ck.opt(top, "", "statistics", |ck, v, p| {
            let a = ck.array(v, p)?;
            let names: Vec<Option<String>> =
                a.iter().enumerate().map(|(i, x)| ck.string(x, &format!("{p}[{i}]")).map(str::to_string)).collect();
            names.into_iter().collect::<Option<Vec<String>>>()
        });
        let statistics = statistics.map(|names| match names {
            Some(names) => names
                .iter()
                .enumerate()
                .map(|(i, n)| parse_statistic(n, scenario.as_ref(), known.as_deref(), &format!("statistics[{i}]"), &mut ck))
                .collect(),
            None => match (&scenario, experiment) {
                (Some(LatentScenario::Mixture(m)), Some(Experiment::Fork)) if !m.attributes().is_empty() => {
                    m.attributes().iter().map(|a| Statistic::Attribute(a.name.clone())).collect()
                }
                (Some(LatentScenario::Gaussian(_)), _) => vec![Statistic::FullLatent],
                _ => vec![Statistic::Component],
            },
        });
        let times = |ck: &mut Checker, key: &str| ck.opt(top, "", key, |ck, v, p| ck.num_array(v, p)).map(Option::unwrap_or_default);
        let tau_list = times(&mut ck, "tau_list");
        let dpi_times = times(&mut ck, "dpi_times");
        let oracle_times = times(&mut ck, "oracle_times");
        let strides = ck
            .opt(top, "", "strides", |ck, v, p| ck.uint_array(v, p))
            .map(|s| s.map_or(vec![1, 10, 100], |s| s.into_iter().map(|x| x as usize).collect()));
        let rows = ck.opt(top, "", "rows", |ck, v, p| ck.uint(v, p)).map(|r| r.unwrap_or(200) as usize);

        let (
            Some(experiment),
            Some(seed),
            Some(output_dir),
            Some(scenario),
            Some(observation),
            Some(grid),
            Some(mc),
            Some(sampler),
            Some(statistics),
            Some(tau_list),
            Some(dpi_times),
            Some(oracle_times),
            Some(strides),
            Some(rows),
        ) = (
            experiment,
            seed,
            output_dir,
            scenario,
            observation,
            grid,
            mc,
            sampler,
            statistics,
            tau_list,
            dpi_times,
            oracle_times,
            strides,
            rows,
        )
        else {
            return Err(ConfigError { problems: ck.problems });
        };
        let config = ExperimentConfig {
            experiment,
            seed,
            output_dir,
            scenario,
            observation,
            grid,
            sampler,
            mc,
            statistics,
            tau_list,
            dpi_times,
            oracle_times,
            strides,
            rows,
        };
        config.semantic_checks(&mut ck);
        if ck.problems.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError { problems: ck.problems })
        }
    }

    fn semantic_checks(&self, ck: &mut Checker) {
        let end = self.grid.horizon - self.grid.epsilon;
        let dim = self.scenario.dim();
        let mixture = matches!(self.scenario, LatentScenario::Mixture(_));
        let bridge = matches!(self.observation, ObservationSpec::LinearBridge { .. });
        if self.rows < 2 {
            ck.err("rows", format!("must be >= 2, got {}", self.rows));
        }
        for (key, ts) in [("tau_list", &self.tau_list), ("dpi_times", &self.dpi_times), ("oracle_times", &self.oracle_times)] {
            for (i, &t) in ts.iter().enumerate() {
                if !(t >= 0.0 && t <= end) {
                    ck.err(&format!("{key}[{i}]"), format!("{t} outside the grid [0, {end}]"));
                }
            }
        }
        if let ObservationSpec::LinearBridge { alpha } = self.observation {
            if let (Ok(s), Ok(g)) = (Schedule::new(alpha, self.grid.horizon), self.grid.build()) {
                if let Err(e) = crate::generative::check_step_ratio(&s, &g) {
                    ck.err("grid", e);
                }
            }
        }
        let needs = |ck: &mut Checker, ok: bool, what: &str| {
            if !ok {
                ck.err("experiment", format!("`{}` needs {what}", self.experiment.name()));
            }
        };
        match self.experiment {
            Experiment::FilterBench => {
                let gaussian_static = matches!(self.scenario, LatentScenario::Gaussian(_)) && !bridge;
                needs(ck, mixture || gaussian_static, "a mixture, or a Gaussian latent with static observation");
                if mixture {
                    if let Ok(g) = self.grid.build() {
                        for (i, &s) in self.strides.iter().enumerate() {
                            if s == 0 || g.steps() % s != 0 {
                                ck.err(&format!("strides[{i}]"), format!("{s} does not divide the step count {}", g.steps()));
                            }
                        }
                    }
                }
            }
            Experiment::MiCurve => {
                if !self.dpi_times.is_empty() {
                    match &self.scenario {
                        LatentScenario::Mixture(m) if m.len() <= 4 => {}
                        _ => ck.err("dpi_times", "the sufficiency check needs a mixture with at most 4 components"),
                    }
                }
                if !self.oracle_times.is_empty() && mixture && (!bridge || dim > 2) {
                    ck.err("oracle_times", "the mixture quadrature oracle needs the linear bridge and dimension <= 2");
                }
            }
            Experiment::Fork => {
                needs(ck, mixture && bridge, "a mixture scenario and the linear bridge");
                if self.mc.k < 2 {
                    ck.err("mc.k", "forking needs k >= 2");
                }
                if self.statistics.iter().any(|s| matches!(s, Statistic::Constant | Statistic::FullLatent)) {
                    ck.err("statistics", "forking reports labelled attributes or `component`");
                }
            }
            Experiment::BridgeCheck => needs(ck, bridge, "the linear bridge"),
            Experiment::JointVsBridge => needs(ck, mixture && bridge, "a mixture scenario and the linear bridge"),
        }
        let score_based = self.sampler.method != crate::generative::SamplerMethod::JointSystem;
        if !bridge && score_based && matches!(self.experiment, Experiment::Fork) {
            ck.err("sampler.method", "score-based samplers need the linear bridge");
        }
    }

    pub fn observation_model(&self) -> ObservationModel {
        match self.observation {
            ObservationSpec::LinearBridge { alpha } => ObservationModel::LinearBridge(Schedule { alpha, horizon: self.grid.horizon }),
            ObservationSpec::Static => ObservationModel::Static,
        }
    }

    pub fn schedule(&self) -> Option<Schedule> {
        match self.observation {
            ObservationSpec::LinearBridge { alpha } => Some(Schedule { alpha, horizon: self.grid.horizon }),
            ObservationSpec::Static => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The fully resolved config, with every default made explicit.
    pub fn to_document(&self) -> Value {
        let scenario = match &self.scenario {
            LatentScenario::Mixture(m) => {
                let attributes: Vec<Value> = m
                    .attributes()
                    .iter()
                    .map(|a| match &a.values {
                        StatisticValues::Labels(l) => json!({"name": a.name, "labels": l}),
                        StatisticValues::Vectors(v) => json!({"name": a.name, "vectors": v}),
                    })
                    .collect();
                json!({"kind": "mixture", "weights": m.weights(), "renderings": m.renderings(), "attributes": attributes})
            }
            LatentScenario::Gaussian(g) => json!({"kind": "gaussian", "mean": g.mean, "variance": g.variance}),
        };
        let observation = match self.observation {
            ObservationSpec::LinearBridge { alpha } => json!({"kind": "linear-bridge", "alpha": alpha}),
            ObservationSpec::Static => json!({"kind": "static"}),
        };
        let mut grid = json!({"horizon": self.grid.horizon, "epsilon": self.grid.epsilon, "steps": self.grid.steps});
        match self.grid.spacing {
            Spacing::Uniform => grid["spacing"] = json!("uniform"),
            Spacing::GeometricRefined { fraction } => {
                grid["spacing"] = json!("refined");
                grid["refined_fraction"] = json!(fraction);
            }
        }
        let mc = &self.mc;
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment.name(),
            "seed": self.seed,
            "scenario": scenario,
            "observation": observation,
            "grid": grid,
            "sampler": serde_json::to_value(self.sampler).expect("sampler config serializes"),
            "mc": {
                "n_paths": mc.n_paths, "n_particles": mc.n_particles, "k": mc.k,
                "n_seeds": mc.n_seeds, "bins": mc.bins, "bootstrap": mc.bootstrap
            },
            "statistics": self.statistics.iter().map(statistic_name).collect::<Vec<_>>(),
            "tau_list": self.tau_list,
            "dpi_times": self.dpi_times,
            "oracle_times": self.oracle_times,
            "strides": self.strides,
            "rows": self.rows,
        });
        if let Some(o) = &self.output_dir {
            doc["output_dir"] = json!(o);
        }
        doc
    }

    /// Bytes of the stored config copy: pretty JSON with sorted keys.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut b = serde_json::to_vec_pretty(&self.to_document()).expect("config serializes");
        b.push(b'\n');
        b
    }

    /// SHA-256 of [`ExperimentConfig::canonical_bytes`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }
}

/// Every problem with the config document at `path`; empty when valid.
pub fn validate_file(path: &Path) -> Vec<String> {
    match ExperimentConfig::load(path) {
        Ok(_) => Vec::new(),
        Err(e) => e.problems,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        json!({
            "schema_version": 1,
            "experiment": "mi-curve",
            "seed": 5,
            "scenario": {"kind": "mixture", "weights": [0.5, 0.5], "renderings": [[-1.0], [1.0]],
                         "attributes": [{"name": "sign", "labels": [0, 1]}]},
            "observation": {"kind": "linear-bridge", "alpha": 1.0},
            "grid": {"horizon": 1.0, "epsilon": 0.001, "steps": 100}
        })
    }

    #[test]
    fn valid_document_parses_and_round_trips() {
        let c = ExperimentConfig::from_value(&base()).unwrap();
        assert_eq!(c.statistics, vec![Statistic::Component]);
        let again = ExperimentConfig::from_value(&c.to_document()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.digest(), c.digest());
    }

    #[test]
    fn missing_weights_are_named() {
        let mut d = base();
        d["scenario"].as_object_mut().unwrap().remove("weights");
        let e = ExperimentConfig::from_value(&d).unwrap_err();
        assert!(e.problems.iter().any(|p| p.contains("scenario.weights")), "{e}");
    }

    #[test]
    fn problems_are_listed_exhaustively() {
        let mut d = base();
        d["grid"]["epsilon"] = json!(2.0);
        d["experiment"] = json!("nope");
        d["mc"] = json!({"n_paths": 0, "bogus": 1});
        d["statistics"] = json!(["sign", "colour"]);
        let e = ExperimentConfig::from_value(&d).unwrap_err();
        let all = e.problems.join("\n");
        for needle in ["grid", "experiment", "mc.n_paths", "mc.bogus", "statistics[1]"] {
            assert!(all.contains(needle), "{needle} missing from\n{all}");
        }
    }

    #[test]
    fn broken_scenario_still_checks_attributes_and_statistics() {
        let mut d = base();
        d["scenario"].as_object_mut().unwrap().remove("weights");
        d["scenario"]["attributes"] = json!([{"name": "sign", "labels": [0, 1, 1]}]);
        d["statistics"] = json!(["colour"]);
        let all = ExperimentConfig::from_value(&d).unwrap_err().problems.join("\n");
        for needle in ["scenario.weights", "attributes.sign", "unknown attribute `colour`"] {
            assert!(all.contains(needle), "{needle} missing from\n{all}");
        }
    }

    #[test]
    fn epsilon_beyond_horizon_is_flagged() {
        let mut d = base();
        d["grid"]["epsilon"] = json!(1.0);
        let e = ExperimentConfig::from_value(&d).unwrap_err();
        assert!(e.problems.iter().any(|p| p.starts_with("grid:")), "{e}");
    }

    #[test]
    fn attribute_with_wrong_length_is_flagged() {
        let mut d = base();
        d["scenario"]["attributes"] = json!([{"name": "sign", "labels": [0, 1, 1]}]);
        let e = ExperimentConfig::from_value(&d).unwrap_err();
        assert!(e.problems.iter().any(|p| p.contains("attributes.sign")), "{e}");
    }

    #[test]
    fn builtin_scenarios_resolve_with_overrides() {
        let d = json!({
            "schema_version": 1, "experiment": "fork",
            "scenario": {"builtin": "hierarchy"},
            "grid": {"steps": 500}
        });
        let c = ExperimentConfig::from_value(&d).unwrap();
        assert_eq!(c.grid.steps, 500);
        assert_eq!(c.grid.horizon, 4.5);
        assert_eq!(c.sampler, SamplerConfig::backward());
        assert_eq!(c.statistics.len(), 2);
        let d = json!({
            "schema_version": 1, "experiment": "mi-curve",
            "scenario": {"builtin": "binary"}, "observation": {"kind": "static"}
        });
        assert_eq!(ExperimentConfig::from_value(&d).unwrap().observation, ObservationSpec::Static);
        let bad = json!({"schema_version": 1, "experiment": "fork", "scenario": {"builtin": "nowhere"}});
        assert!(ExperimentConfig::from_value(&bad).is_err());
    }

    #[test]
    fn every_builtin_is_valid_for_its_family() {
        for b in crate::harness::builtin_scenarios() {
            let d = json!({"schema_version": 1, "experiment": "mi-curve", "scenario": {"builtin": b.name}});
            ExperimentConfig::from_value(&d).unwrap_or_else(|e| panic!("{}: {e}", b.name));
        }
    }
}
