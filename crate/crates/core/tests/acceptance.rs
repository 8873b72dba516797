//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Thresholds are fixed; see
//! `notes/decisions.md` for how each one is measured.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use latentfilter::filtering::{exact_discrete_filter, extract_innovation, ConditioningSpec};
use latentfilter::harness::{self, ExperimentConfig, RunOptions};
use latentfilter::information::{
    dpi_check, gaussian_channel_mi, mi_general, mi_linear, mi_quadrature_oracle, mi_score_gap, score_gap_integrands,
    simulate_under_prior, PluginConfig, ScoreGapForm,
};
use latentfilter::models::{
    Attribute, GaussianLatent, LatentScenario, Mixture, ObservationModel, Schedule, ScoreModel, Statistic,
};
use latentfilter::sde::{make_grid, RandomStream, Spacing};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

/// CSV files of one harness run, keyed by file name.
type Files = BTreeMap<String, Vec<u8>>;

struct Harness {
    runs: Vec<(String, Value, Files)>,
    scratch: tempfile::TempDir,
}

impl Harness {
    fn run(&mut self, label: &str, doc: Value) -> Result<Files, String> {
        let config = ExperimentConfig::from_value(&doc).map_err(|e| format!("{label}: {e}"))?;
        let out = self.scratch.path().join(format!("{}-{label}", self.runs.len()));
        let files = run_into(&config, &out)?;
        self.runs.push((label.to_string(), doc, files.clone()));
        Ok(files)
    }
}

fn run_into(config: &ExperimentConfig, out: &Path) -> Result<Files, String> {
    let manifest = harness::run(config, out, RunOptions { plots: false }).map_err(|e| e.to_string())?;
    let mut files = Files::new();
    for r in manifest.outputs.iter().filter(|r| r.file.ends_with(".csv")) {
        let bytes = std::fs::read(out.join(&r.file)).map_err(|e| e.to_string())?;
        files.insert(r.file.clone(), bytes);
    }
    Ok(files)
}

fn rows(files: &Files, name: &str) -> Vec<HashMap<String, String>> {
    let bytes = files.get(name).unwrap_or_else(|| panic!("{name} was not written"));
    csv::Reader::from_reader(bytes.as_slice()).deserialize().map(|r| r.expect("well-formed csv")).collect()
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("column {col} is not numeric: {}", row[col]))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn binary() -> Mixture {
    Mixture::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![]).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn filter_correctness(h: &mut Harness) -> Outcome {
    let files = h
        .run(
            "filter-k3",
            json!({
                "schema_version": 1, "experiment": "filter-bench", "seed": 101,
                "scenario": {"builtin": "triad"},
                "grid": {"horizon": 1.0, "epsilon": 0.01, "steps": 9900, "spacing": "uniform"},
                "mc": {"n_paths": 100, "n_particles": 0},
                "strides": [1, 10, 100]
            }),
        )?;
    let conv = rows(&files, "filter_convergence.csv");
    let pts: Vec<(f64, f64)> = conv.iter().map(|r| (num(r, "max_dt"), num(r, "max_tv_mean"))).collect();
    let finest = pts[0].1;
    let decreasing = pts.windows(2).all(|w| w[0].1 < w[1].1);
    let order = loglog_slope(&pts);
    let curve: Vec<String> = pts.iter().map(|(dt, tv)| format!("{dt:.0e}:{tv:.4}")).collect();
    check(
        finest <= 0.05 && decreasing && order >= 0.4,
        format!("K=3 max TV by dt [{}], order {order:.2} (need TV <= 0.05, order >= 0.4)", curve.join(" ")),
    )
}

fn particle_vs_kalman(h: &mut Harness) -> Outcome {
    let files = h.run(
        "particle-gaussian",
        json!({
            "schema_version": 1, "experiment": "filter-bench", "seed": 202,
            "scenario": {"builtin": "gaussian-static"},
            "mc": {"n_paths": 20, "n_particles": 10000},
            "rows": 101
        }),
    )?;
    let t = rows(&files, "filter_gaussian.csv");
    let worst = |col: &str| t.iter().map(|r| num(r, col)).fold(0.0, f64::max);
    let (m, v) = (worst("mean_rel_error"), worst("variance_rel_error"));
    let end = t.iter().map(|r| num(r, "t")).fold(0.0, f64::max);
    check(
        m <= 0.05 && v <= 0.05,
        format!("worst mean rel. error {m:.4}, variance rel. error {v:.4} over t in [0, {end:.3}] (need <= 0.05)"),
    )
}

fn innovation() -> Outcome {
    let m = binary();
    let obs = ObservationModel::LinearBridge(Schedule::new(1.0, 1.0).unwrap());
    let grid = make_grid(1.0, 1000, 1e-3, Spacing::Uniform).unwrap();
    let scenario = LatentScenario::Mixture(m.clone());
    let root = RandomStream::new(303, 0);
    let n = 10_000;
    let idx: Vec<usize> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&t| grid.nearest_index(t)).collect();
    let samples: Vec<Vec<(f64, f64)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = simulate_under_prior(&scenario, &obs, &grid, root.derive(i))?;
            let pi = exact_discrete_filter(&p.path, &m, &obs, &ConditioningSpec::MeasurementsOnly)?;
            let w = extract_innovation(&p.path, &pi, &m, &obs)?;
            Ok(idx.iter().map(|&j| (w.step(j)[0], w.step(j + 1)[0])).collect())
        })
        .collect::<latentfilter::Result<_>>()
        .map_err(|e| e.to_string())?;
    let nf = n as f64;
    let (mut worst_mean, mut worst_var, mut worst_lag): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (c, &j) in idx.iter().enumerate() {
        let a: Vec<f64> = samples.iter().map(|s| s[c].0).collect();
        let b: Vec<f64> = samples.iter().map(|s| s[c].1).collect();
        let (ma, sa) = mean_sd(&a);
        let (mb, sb) = mean_sd(&b);
        worst_mean = worst_mean.max((ma / (sa / nf.sqrt())).abs());
        let second = a.iter().map(|x| x * x).sum::<f64>() / nf;
        worst_var = worst_var.max((second / grid.dt(j) - 1.0).abs());
        let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (nf - 1.0);
        worst_lag = worst_lag.max((cov / (sa * sb) * nf.sqrt()).abs());
    }
    check(
        worst_mean <= 4.0 && worst_var <= 0.05 && worst_lag <= 4.0,
        format!(
            "{n} paths, 5 times: worst |mean| {worst_mean:.2} sigma, worst |E dW^2 / dt - 1| {worst_var:.4}, worst |lag-1 corr| {worst_lag:.2} sigma"
        ),
    )
}

fn bridge_pinning(h: &mut Harness) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (alpha, seed) in [(0.0, 400), (1.0, 401)] {
        let files = h.run(
            &format!("bridge-alpha{alpha}"),
            json!({
                "schema_version": 1, "experiment": "bridge-check", "seed": seed,
                "scenario": {"kind": "mixture", "weights": [0.5, 0.5], "renderings": [[-1.0], [2.0]]},
                "observation": {"kind": "linear-bridge", "alpha": alpha},
                "grid": {"horizon": 1.0, "epsilon": 0.001, "steps": 1000, "spacing": "refined"},
                "mc": {"n_paths": 1000},
                "rows": 11
            }),
        )?;
        let term = rows(&files, "bridge_terminal.csv");
        let worst_ratio = term.iter().map(|r| (num(r, "ratio") - 1.0).abs()).fold(0.0, f64::max);
        let mom = rows(&files, "bridge_moments.csv");
        let worst_z = mom
            .iter()
            .filter(|r| num(r, "mean_se") > 0.0)
            .map(|r| ((num(r, "mc_mean") - num(r, "analytic_mean")) / num(r, "mean_se")).abs())
            .fold(0.0, f64::max);
        ok &= worst_ratio <= 0.2 && worst_z <= 3.0;
        lines.push(format!("alpha={alpha}: terminal MSE off by {:.1}%, mean within {worst_z:.2} SE", 100.0 * worst_ratio));
    }
    check(ok, lines.join("; "))
}

fn generative_equivalence(h: &mut Harness) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, seed) in [("binary", 500), ("quad", 501)] {
        let files = h.run(
            &format!("joint-{name}"),
            json!({
                "schema_version": 1, "experiment": "joint-vs-bridge", "seed": seed,
                "scenario": {"builtin": name},
                "mc": {"n_paths": 10000}
            }),
        )?;
        let s = &rows(&files, "joint_summary.csv")[0];
        let (fz, mz) = (num(s, "max_abs_frequency_z"), num(s, "max_abs_moment_z"));
        ok &= fz <= 4.0 && mz <= 4.0;
        lines.push(format!("{name}: frequency |z| {fz:.2}, two-sample moment |z| {mz:.2}"));
    }
    check(ok, format!("{} (need <= 4)", lines.join("; ")))
}

fn drift_identity() -> Outcome {
    let quad = Mixture::new(
        vec![0.1, 0.2, 0.3, 0.4],
        vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]],
        vec![Attribute::labels("row", vec![0, 0, 1, 1])],
    )
    .unwrap();
    let triad = Mixture::new(vec![0.3, 0.3, 0.4], vec![vec![-1.5], vec![0.0], vec![1.5]], vec![]).unwrap();
    let scenarios = [LatentScenario::Mixture(triad), LatentScenario::Mixture(quad)];
    let mut rng = RandomStream::new(606, 0).rng();
    let mut worst: f64 = 0.0;
    let n = 100_000;
    for i in 0..n {
        let scenario = &scenarios[i % 2];
        let alpha = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..3.0) };
        let t = rng.random_range(0.0..0.999);
        let y: Vec<f64> = (0..scenario.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let model = ScoreModel::new(scenario.clone(), Schedule::new(alpha, 1.0).unwrap());
        let a = model.score_form_drift(&y, t).map_err(|e| e.to_string())?;
        let b = model.filter_form_drift(&y, t).map_err(|e| e.to_string())?;
        for (x, z) in a.iter().zip(&b) {
            worst = worst.max((x - z).abs() / x.abs().max(1.0));
        }
    }
    check(worst <= 1e-10, format!("{n} random (y, t, alpha): worst difference {worst:.2e} (need <= 1e-10)"))
}

fn mi_exactness() -> Outcome {
    // static Gaussian channel observed up to t = 1
    let g = LatentScenario::Gaussian(GaussianLatent { mean: vec![0.0], variance: 1.0 });
    let grid = make_grid(1.001, 1000, 1e-3, Spacing::Uniform).unwrap();
    let e = mi_general(&g, &ObservationModel::Static, &grid, &Statistic::FullLatent, 10_000, RandomStream::new(707, 0))
        .map_err(|e| e.to_string())?;
    let (gv, _) = e.at(1.0);
    let target = 0.5 * 2f64.ln();
    let static_ok = (gv / target - 1.0).abs() <= 0.05;

    // symmetric binary mixture against quadrature
    let m = binary();
    let schedule = Schedule::new(1.0, 1.0).unwrap();
    let model = ScoreModel::new(LatentScenario::Mixture(m.clone()), schedule);
    let grid = make_grid(1.0, 2000, 1e-3, Spacing::Uniform).unwrap();
    let root = RandomStream::new(708, 0);
    let lin = mi_linear(&model, &grid, &Statistic::Component, 10_000, root.derive(0)).map_err(|e| e.to_string())?;
    let gen = mi_general(
        &LatentScenario::Mixture(m.clone()),
        &ObservationModel::LinearBridge(schedule),
        &grid,
        &Statistic::Component,
        10_000,
        root.derive(1),
    )
    .map_err(|e| e.to_string())?;
    let (mut worst_rel, mut worst_z): (f64, f64) = (0.0, 0.0);
    for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let oracle = mi_quadrature_oracle(&m, &schedule, t, &Statistic::Component).map_err(|e| e.to_string())?;
        let (l, ls) = lin.at(t);
        let (q, qs) = gen.at(t);
        worst_rel = worst_rel.max((l / oracle - 1.0).abs());
        worst_z = worst_z.max((l - q).abs() / (ls * ls + qs * qs).sqrt());
    }
    check(
        static_ok && worst_rel <= 0.05 && worst_z <= 3.0,
        format!(
            "static Gaussian {gv:.4} vs {target:.4}; binary mi_linear vs quadrature worst {:.1}%, mi_general vs mi_linear worst {worst_z:.2} sigma",
            100.0 * worst_rel
        ),
    )
}

fn score_gap() -> Outcome {
    let mut rng = RandomStream::new(808, 0).rng();
    let mixture = Mixture::new(vec![0.3, 0.3, 0.4], vec![vec![-1.5], vec![0.0], vec![1.5]], vec![]).unwrap();
    let gauss = LatentScenario::Gaussian(GaussianLatent { mean: vec![0.5, -0.5], variance: 1.0 });
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let alpha = rng.random_range(0.0..2.0);
        let t = rng.random_range(0.0..0.99);
        let schedule = Schedule::new(alpha, 1.0).unwrap();
        let (model, v) = if i % 2 == 0 {
            let k = rng.random_range(0..3);
            (ScoreModel::new(LatentScenario::Mixture(mixture.clone()), schedule), mixture.rendering(k).to_vec())
        } else {
            let v = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            (ScoreModel::new(gauss.clone(), schedule), v)
        };
        let y: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (a, b) = score_gap_integrands(&model, &y, t, &v).map_err(|e| e.to_string())?;
        for (x, z) in a.iter().zip(&b) {
            worst = worst.max((x + z).abs() / x.abs().max(1.0));
        }
    }
    let g = LatentScenario::Gaussian(GaussianLatent { mean: vec![0.0], variance: 1.0 });
    let schedule = Schedule::new(1.0, 1.0).unwrap();
    let model = ScoreModel::new(g, schedule);
    let grid = make_grid(1.0, 1000, 1e-3, Spacing::Uniform).unwrap();
    let e = mi_score_gap(&model, &grid, 10_000, RandomStream::new(809, 0), ScoreGapForm::MarginalVsConditional)
        .map_err(|e| e.to_string())?;
    let mut worst_rel: f64 = 0.0;
    for t in [0.3, 0.6, 0.9] {
        let u = 1.0 - t;
        let exact = gaussian_channel_mi(1, 1.0, schedule.decay(u), schedule.noise_variance(u));
        worst_rel = worst_rel.max((e.at(t).0 / exact - 1.0).abs());
    }
    check(
        worst <= 1e-8 && worst_rel <= 0.05,
        format!("integrand forms differ by at most {worst:.2e}; Gaussian estimate off by at most {:.1}% for t <= 0.9", 100.0 * worst_rel),
    )
}

fn sufficiency_dpi() -> Outcome {
    let m = binary();
    let obs = ObservationModel::LinearBridge(Schedule::new(1.0, 1.0).unwrap());
    let grid = make_grid(1.0, 2000, 1e-3, Spacing::Uniform).unwrap();
    let plug = PluginConfig { bins: 20, bootstrap: 200 };
    let r = dpi_check(&m, &obs, &grid, &Statistic::Component, 4000, RandomStream::new(909, 0), &[0.3, 0.6, 0.9], &plug)
        .map_err(|e| e.to_string())?;
    let suff = r.rows.iter().map(|r| r.sufficiency_z()).fold(0.0, f64::max);
    let dpi = r.rows.iter().map(|r| r.dpi_z()).fold(f64::NEG_INFINITY, f64::max);
    check(
        suff <= 3.0 && dpi <= 3.0,
        format!("|I(pi_t) - I(Y)| at most {suff:.2} sigma; I(<pi_t, H>) - I(Y) at most {dpi:.2} sigma (3 times)"),
    )
}

fn forking(h: &mut Harness) -> Outcome {
    let files = h.run(
        "fork-hierarchy",
        json!({
            "schema_version": 1, "experiment": "fork", "seed": 1,
            "scenario": {"builtin": "hierarchy"},
            "mc": {"k": 100, "n_seeds": 10, "n_paths": 2000}
        }),
    )?;
    let ent = rows(&files, "fork_entropy.csv");
    let summary = rows(&files, "fork_summary.csv");
    let mut ok = true;
    let mut lines = Vec::new();
    for attr in ["global", "local"] {
        let curve: Vec<_> = ent.iter().filter(|r| r["attribute"] == attr).collect();
        let monotone = curve.windows(2).all(|w| {
            let slack = 2.0 * (num(w[0], "stderr").powi(2) + num(w[1], "stderr").powi(2)).sqrt();
            num(w[1], "mean_entropy") <= num(w[0], "mean_entropy") + slack
        });
        let first = curve[0];
        let start_z = (num(first, "mean_entropy") - num(first, "null_entropy")).abs() / num(first, "null_stderr");
        let end = num(curve[curve.len() - 1], "mean_entropy");
        ok &= monotone && start_z <= 4.0 && end < 0.05;
        lines.push(format!(
            "{attr}: monotone {monotone}, start {:.4} vs prior {:.4} ({start_z:.1} sigma from the k-sample expectation), end {end:.4}",
            num(first, "mean_entropy"),
            num(first, "prior_entropy")
        ));
    }
    let get = |attr: &str, col: &str| num(summary.iter().find(|r| r["attribute"] == attr).unwrap(), col);
    let interval = get("global", "tau_interval");
    let tol = 1e-9 * interval;
    let (hg, hl) = (get("global", "half_entropy_crossing"), get("local", "half_entropy_crossing"));
    let (mg, ml) = (get("global", "mi_half_cap_crossing"), get("local", "mi_half_cap_crossing"));
    let (ig, il) =
        (get("global", "half_entropy_crossing_interpolated"), get("local", "half_entropy_crossing_interpolated"));
    let ordered = hl - hg >= interval - tol;
    let coherent = (ig - mg).abs() <= interval && (il - ml).abs() <= interval && mg < ml;
    ok &= ordered && coherent;
    lines.push(format!(
        "half-entropy crossings {hg:.3} < {hl:.3} on the fork grid (interval {interval:.3}), \
         interpolated {ig:.3} / {il:.3} against MI half-cap crossings {mg:.3} / {ml:.3}"
    ));
    check(ok, lines.join("; "))
}

fn reproducibility(h: &Harness) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (label, doc, files) in &h.runs {
        let config = ExperimentConfig::from_value(doc).map_err(|e| e.to_string())?;
        let out = h.scratch.path().join(format!("repeat-{label}"));
        let again = pool.install(|| run_into(&config, &out))?;
        if &again != files {
            let differing: Vec<&String> = files.keys().filter(|k| again.get(*k) != files.get(*k)).collect();
            return Err(format!("{label}: {differing:?} differ on the repeat run"));
        }
        compared += files.len();
    }
    check(
        compared > 0,
        format!("{} harness runs repeated on one thread: {compared} CSV files byte-identical", h.runs.len()),
    )
}

fn main() {
    let mut h = Harness { runs: Vec::new(), scratch: tempfile::tempdir().expect("temporary directory") };
    let mut failures = 0;
    let mut report = |id: usize, title: &str, budget: Option<f64>, f: &mut dyn FnMut(&mut Harness) -> Outcome| {
        let clock = Instant::now();
        let outcome = f(&mut h);
        let secs = clock.elapsed().as_secs_f64();
        let over = budget.is_some_and(|b| secs > b);
        let (status, detail) = match outcome {
            Ok(d) if !over => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; runtime over budget")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failures += 1;
        }
        let budget = budget.map_or(String::new(), |b| format!(", budget {b:.0} s"));
        println!("criterion {id:>2} {status}  {title}: {detail} [{secs:.1} s{budget}]");
    };
    report(1, "Kushner vs exact filter", Some(60.0), &mut filter_correctness);
    report(2, "particle filter vs Kalman-Bucy", Some(60.0), &mut particle_vs_kalman);
    report(3, "innovation is Brownian", None, &mut |_| innovation());
    report(4, "bridge pinning", None, &mut bridge_pinning);
    report(5, "joint system vs latent-then-bridge", None, &mut generative_equivalence);
    report(6, "score and filter drift forms", None, &mut |_| drift_identity());
    report(7, "MI exactness and consistency", None, &mut |_| mi_exactness());
    report(8, "score-gap identity", None, &mut |_| score_gap());
    report(9, "sufficiency and data processing", None, &mut |_| sufficiency_dpi());
    report(10, "forking entropy curves", Some(600.0), &mut forking);
    report(11, "reproducibility", None, &mut |h| reproducibility(h));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
