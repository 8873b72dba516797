//! The experiment families run by the harness. Each returns its tables and
//! plots; writing them is left to the caller.

use super::config::{Experiment, ExperimentConfig};
use super::output::{Cell, Plot, Table};
use crate::error::{Error, Result};
use crate::filtering::{
    exact_discrete_filter, kalman_bucy, kalman_bucy_variance, kushner_filter, particle_filter, total_variation,
    ConditioningSpec, MixtureLatent, ResamplePolicy,
};
use crate::forking::{run_forking, ForkConfig};
use crate::generative::{nearest_rendering, simulate_bridge_from, simulate_joint_system};
use crate::information::{
    channel_mi, dpi_check, gaussian_channel_mi, mi_general, mi_linear, mi_score_gap, MIEstimate, PluginConfig,
    ScoreGapForm, QUADRATURE_TOLERANCE,
};
use crate::mc::for_each_ordered;
use crate::models::{analytic_bridge_moments, LatentScenario, Mixture, ScoreModel, Statistic, COMPONENT_ATTRIBUTE};
use crate::row;
use crate::sde::{RandomStream, TimeGrid};

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
}

/// Numerical failure annotated with the stage that raised it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: String,
    pub error: Error,
}

trait Stage<T> {
    fn stage(self, stage: &str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage: stage.to_string(), error })
    }
}

type Staged<T> = std::result::Result<T, StageError>;

/// At most `rows` indices out of `0..len`, evenly strided, always including
/// the last.
pub(crate) fn record_indices(len: usize, rows: usize) -> Vec<usize> {
    let stride = len.div_ceil(rows.max(2) - 1).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

pub(crate) fn statistic_label(s: &Statistic) -> String {
    match s {
        Statistic::Constant => "constant".into(),
        Statistic::Component => COMPONENT_ATTRIBUTE.into(),
        Statistic::FullLatent => "full-latent".into(),
        Statistic::Attribute(a) => a.clone(),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Staged<ExperimentOutput> {
    let grid = config.grid.build().stage("grid")?;
    let root = RandomStream::new(config.seed, 0);
    let out = match config.experiment {
        Experiment::FilterBench => filter_bench(config, &grid, root),
        Experiment::MiCurve => mi_curve(config, &grid, root),
        Experiment::Fork => fork(config, &grid, root),
        Experiment::BridgeCheck => bridge_check(config, &grid, root),
        Experiment::JointVsBridge => joint_vs_bridge(config, &grid, root),
    }?;
    check_finite(&out.tables).stage("output")?;
    Ok(out)
}

/// Columns where NaN stands for "not available" rather than a failure.
const OPTIONAL_COLUMNS: [&str; 6] = [
    "particle_tv_mean",
    "particle_tv_se",
    "i0",
    "half_entropy_crossing",
    "half_entropy_crossing_interpolated",
    "mi_half_cap_crossing",
];

/// Overflow anywhere, or NaN outside the optional columns, is a numerical
/// failure rather than a result.
fn check_finite(tables: &[Table]) -> Result<()> {
    for t in tables {
        for r in &t.rows {
            for (cell, &column) in r.iter().zip(&t.header) {
                if let Cell::F(x) = cell {
                    if x.is_infinite() || (x.is_nan() && !OPTIONAL_COLUMNS.contains(&column)) {
                        return Err(Error::NonFiniteOutput { table: t.name.clone(), column: column.to_string() });
                    }
                }
            }
        }
    }
    Ok(())
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn filter_bench(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    match &c.scenario {
        LatentScenario::Mixture(m) => filter_bench_mixture(c, m, grid, root),
        LatentScenario::Gaussian(_) => filter_bench_gaussian(c, grid, root),
    }
}

struct BenchPath {
    kushner_tv: Vec<f64>,
    particle_tv: Vec<f64>,
    coarse_tv: Vec<(f64, usize)>,
}

fn filter_bench_mixture(c: &ExperimentConfig, m: &Mixture, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let obs = c.observation_model();
    let rec = record_indices(grid.len(), c.rows);
    let none = ConditioningSpec::MeasurementsOnly;
    let latent = MixtureLatent::new(m, &none).stage("particle prior")?;
    let mut paths = Vec::with_capacity(c.mc.n_paths);
    for_each_ordered(
        c.mc.n_paths as u64,
        |i| {
            let s = root.derive(i);
            let p = crate::information::simulate_under_prior(&c.scenario, &obs, grid, s)?;
            let exact = exact_discrete_filter(&p.path, m, &obs, &none)?;
            let kushner = kushner_filter(&p.path, m, &obs, &none)?;
            let kushner_tv = rec.iter().map(|&j| total_variation(exact.at(j), kushner.trajectory.at(j))).collect();
            let particle_tv = if c.mc.n_particles > 0 {
                let run = particle_filter(&p.path, &latent, &obs, c.mc.n_particles, ResamplePolicy::default(), s.derive(1_000_003), &rec)?;
                run.snapshots.iter().map(|(j, cloud)| total_variation(exact.at(*j), &cloud.to_simplex(m.len()))).collect()
            } else {
                Vec::new()
            };
            let mut coarse_tv = Vec::new();
            for &stride in &c.strides {
                let coarse = p.path.subsample(stride)?;
                let run = kushner_filter(&coarse, m, &obs, &none)?;
                let worst = (0..coarse.len())
                    .map(|j| total_variation(exact.at(j * stride), run.trajectory.at(j)))
                    .fold(0.0, f64::max);
                coarse_tv.push((worst, run.clip_events));
            }
            Ok(BenchPath { kushner_tv, particle_tv, coarse_tv })
        },
        |_, b| {
            paths.push(b);
            Ok(())
        },
    )
    .stage("filter-bench paths")?;

    let mut tv = Table::new(
        "filter_tv.csv",
        &["t", "kushner_tv_mean", "kushner_tv_se", "particle_tv_mean", "particle_tv_se"],
    );
    let mut series = (Vec::new(), Vec::new());
    for (r, &j) in rec.iter().enumerate() {
        let k: Vec<f64> = paths.iter().map(|p| p.kushner_tv[r]).collect();
        let (km, kse) = mean_se(&k);
        let (pm, pse) = if c.mc.n_particles > 0 {
            mean_se(&paths.iter().map(|p| p.particle_tv[r]).collect::<Vec<_>>())
        } else {
            (f64::NAN, f64::NAN)
        };
        tv.push(row!(grid.t(j), km, kse, pm, pse));
        series.0.push((grid.t(j), km));
        series.1.push((grid.t(j), pm));
    }
    let mut conv = Table::new(
        "filter_convergence.csv",
        &["stride", "max_dt", "max_tv_mean", "max_tv_se", "max_tv_worst", "clip_events"],
    );
    for (s, &stride) in c.strides.iter().enumerate() {
        let worst: Vec<f64> = paths.iter().map(|p| p.coarse_tv[s].0).collect();
        let clips: usize = paths.iter().map(|p| p.coarse_tv[s].1).sum();
        let max_dt = grid.subsample(stride).stage("coarse grid")?.dts().fold(0.0, f64::max);
        let (m, se) = mean_se(&worst);
        conv.push(row!(stride, max_dt, m, se, worst.iter().cloned().fold(0.0, f64::max), clips));
    }
    let mut plot_series = vec![("Kushner".to_string(), series.0)];
    if c.mc.n_particles > 0 {
        plot_series.push((format!("particles (n = {})", c.mc.n_particles), series.1));
    }
    let plot = Plot {
        name: "filter_tv.svg".into(),
        title: "Total variation to the exact filter".into(),
        x_label: "t".into(),
        y_label: "mean TV".into(),
        series: plot_series,
    };
    Ok(ExperimentOutput { tables: vec![tv, conv], plots: vec![plot] })
}

fn filter_bench_gaussian(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let LatentScenario::Gaussian(g) = &c.scenario else { unreachable!("checked by the caller") };
    let obs = c.observation_model();
    let rec = record_indices(grid.len(), c.rows);
    let n_particles = c.mc.n_particles.max(1);
    let mut errs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for_each_ordered(
        c.mc.n_paths as u64,
        |i| {
            let s = root.derive(i);
            let p = crate::information::simulate_under_prior(&c.scenario, &obs, grid, s)?;
            let kb = kalman_bucy(&p.path, &g.mean, g.variance)?;
            let pf = particle_filter(&p.path, g, &obs, n_particles, ResamplePolicy::default(), s.derive(1_000_003), &[])?;
            let mut mean_err = Vec::new();
            let mut var_err = Vec::new();
            for &j in &rec {
                let pv = kb.variances[j];
                let scale = kb.means[j].iter().map(|x| x.abs()).fold(pv.sqrt(), f64::max);
                let dm = kb.means[j].iter().zip(&pf.means[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let dv = pf.variances[j].iter().map(|v| (v - pv).abs()).fold(0.0, f64::max);
                mean_err.push(dm / scale);
                var_err.push(if pv > 0.0 { dv / pv } else { dv });
            }
            Ok((mean_err, var_err))
        },
        |_, e| {
            errs.push(e);
            Ok(())
        },
    )
    .stage("filter-bench paths")?;
    let mut t = Table::new(
        "filter_gaussian.csv",
        &["t", "kalman_variance", "mean_rel_error", "mean_rel_error_se", "variance_rel_error", "variance_rel_error_se"],
    );
    let (mut s_mean, mut s_var) = (Vec::new(), Vec::new());
    for (r, &j) in rec.iter().enumerate() {
        let (mm, mse) = mean_se(&errs.iter().map(|e| e.0[r]).collect::<Vec<_>>());
        let (vm, vse) = mean_se(&errs.iter().map(|e| e.1[r]).collect::<Vec<_>>());
        t.push(row!(grid.t(j), kalman_bucy_variance(g.variance, grid.t(j)), mm, mse, vm, vse));
        s_mean.push((grid.t(j), mm));
        s_var.push((grid.t(j), vm));
    }
    let plot = Plot {
        name: "filter_gaussian.svg".into(),
        title: format!("Particle filter ({n_particles} particles) against Kalman-Bucy"),
        x_label: "t".into(),
        y_label: "relative error".into(),
        series: vec![("mean".into(), s_mean), ("variance".into(), s_var)],
    };
    Ok(ExperimentOutput { tables: vec![t], plots: vec![plot] })
}

/// Reference value of `I(Y_t; phi)` when one is available in closed form or
/// by quadrature.
fn oracle(c: &ExperimentConfig, statistic: &Statistic, t: f64) -> Result<Option<(f64, &'static str)>> {
    match (&c.scenario, c.schedule()) {
        (LatentScenario::Mixture(m), Some(s)) if m.dim() <= 2 => {
            let u = s.horizon - t;
            let v = channel_mi(m, statistic, s.decay(u), s.noise_variance(u).sqrt(), QUADRATURE_TOLERANCE)?;
            Ok(Some((v, "quadrature")))
        }
        (LatentScenario::Gaussian(g), schedule) if *statistic == Statistic::FullLatent => {
            let n = g.dim();
            let v = match schedule {
                Some(s) => gaussian_channel_mi(n, g.variance, s.decay(s.horizon - t), s.noise_variance(s.horizon - t)),
                // dY = X dt + dW observed on [0, t]: the statistic Y_t / t has noise variance 1 / t
                None if t > 0.0 => gaussian_channel_mi(n, g.variance, 1.0, 1.0 / t),
                None => 0.0,
            };
            Ok(Some((v, "closed-form")))
        }
        _ => Ok(None),
    }
}

fn mi_curve(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let obs = c.observation_model();
    let rec = record_indices(grid.len(), c.rows);
    let mut curve = Table::new("mi_curve.csv", &["statistic", "estimator", "t", "integrand", "cumulative", "stderr"]);
    let mut summary = Table::new(
        "mi_summary.csv",
        &["statistic", "estimator", "value", "std_error", "i0", "i0_method", "n_paths", "warnings"],
    );
    let mut oracle_t = Table::new("mi_oracle.csv", &["statistic", "t", "value", "method"]);
    let mut dpi = Table::new(
        "mi_dpi.csv",
        &["statistic", "t", "i_full", "i_full_se", "i_pi", "i_pi_se", "i_projection", "i_projection_se"],
    );
    let mut series = Vec::new();
    let model = c.schedule().map(|s| ScoreModel::new(c.scenario.clone(), s));
    for (si, statistic) in c.statistics.iter().enumerate() {
        let name = statistic_label(statistic);
        let stream = root.derive(si as u64);
        let mut estimates: Vec<(&str, MIEstimate)> = Vec::new();
        estimates.push((
            "filtration-gap",
            mi_general(&c.scenario, &obs, grid, statistic, c.mc.n_paths, stream.derive(0)).stage(&format!("mi_general {name}"))?,
        ));
        if let Some(model) = &model {
            estimates.push((
                "linear",
                mi_linear(model, grid, statistic, c.mc.n_paths, stream.derive(1)).stage(&format!("mi_linear {name}"))?,
            ));
            if matches!(c.scenario, LatentScenario::Gaussian(_)) && *statistic == Statistic::FullLatent {
                estimates.push((
                    "score-gap",
                    mi_score_gap(model, grid, c.mc.n_paths, stream.derive(2), ScoreGapForm::MarginalVsConditional)
                        .stage("mi_score_gap")?,
                ));
            }
        }
        for (est_name, e) in &estimates {
            let mut pts = Vec::new();
            for &j in &rec {
                curve.push(row!(name.as_str(), *est_name, e.times[j], e.integrand[j], e.cumulative[j], e.stderr[j]));
                pts.push((e.times[j], e.cumulative[j]));
            }
            let i0 = e.i0.value.unwrap_or(f64::NAN);
            let method = serde_json::to_value(e.i0.method).expect("serializes");
            summary.push(row!(
                name.as_str(),
                *est_name,
                e.value,
                e.std_error,
                i0,
                method.as_str().unwrap_or_default(),
                e.n_paths,
                e.warnings.join("; ")
            ));
            series.push((format!("{name} ({est_name})"), pts));
        }
        let mut opts = Vec::new();
        for &t in &c.oracle_times {
            if let Some((v, method)) = oracle(c, statistic, t).stage("oracle")? {
                oracle_t.push(row!(name.as_str(), t, v, method));
                opts.push((t, v));
            }
        }
        if !opts.is_empty() {
            series.push((format!("{name} (oracle)"), opts));
        }
        if !c.dpi_times.is_empty() {
            let m = c.scenario.as_mixture().stage("dpi")?;
            let plug = PluginConfig { bins: c.mc.bins, bootstrap: c.mc.bootstrap };
            let r = dpi_check(m, &obs, grid, statistic, c.mc.n_paths, stream.derive(3), &c.dpi_times, &plug)
                .stage(&format!("dpi {name}"))?;
            for row in &r.rows {
                dpi.push(row!(
                    name.as_str(),
                    row.t,
                    row.i_full,
                    row.i_full_se,
                    row.i_pi,
                    row.i_pi_se,
                    row.i_projection,
                    row.i_projection_se
                ));
            }
        }
    }
    let mut tables = vec![curve, summary];
    if !oracle_t.rows.is_empty() {
        tables.push(oracle_t);
    }
    if !dpi.rows.is_empty() {
        tables.push(dpi);
    }
    let plot = Plot {
        name: "mi_curve.svg".into(),
        title: "Mutual information between the measurements and the statistic".into(),
        x_label: "t".into(),
        y_label: "nats".into(),
        series,
    };
    Ok(ExperimentOutput { tables, plots: vec![plot] })
}

fn fork(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let schedule = c.schedule().expect("validated: fork needs the linear bridge");
    let model = ScoreModel::new(c.scenario.clone(), schedule);
    let mixture = c.scenario.as_mixture().stage("fork")?;
    let attributes: Vec<String> = c.statistics.iter().map(statistic_label).collect();
    let fc = ForkConfig {
        tau_list: c.tau_list.clone(),
        k: c.mc.k,
        n_seeds: c.mc.n_seeds,
        sampler: c.sampler,
        attributes: attributes.clone(),
        snap_to_nearest: false,
    };
    let report = run_forking(&model, &fc, grid, root.derive(0)).stage("forking")?;
    let mut hist = Table::new("fork_histograms.csv", &["seed", "tau", "attribute", "label", "count"]);
    for h in &report.histograms {
        for (label, &count) in h.counts.iter().enumerate() {
            hist.push(row!(h.seed, h.tau, h.attribute.as_str(), label, count));
        }
    }
    let mut ent = Table::new(
        "fork_entropy.csv",
        &["tau", "attribute", "mean_entropy", "stderr", "prior_entropy", "null_entropy", "null_stderr"],
    );
    for s in &report.summary {
        ent.push(row!(s.tau, s.attribute.as_str(), s.mean_entropy, s.stderr, s.prior_entropy, s.null_entropy, s.null_stderr));
    }
    let taus = fc.resolved_taus(grid);
    let interval = taus.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
    let obs = c.observation_model();
    let mut summary = Table::new(
        "fork_summary.csv",
        &[
            "attribute",
            "prior_entropy",
            "half_entropy_crossing",
            "half_entropy_crossing_interpolated",
            "mi_half_cap_crossing",
            "tau_interval",
            "classifier_ties",
        ],
    );
    let mut series = Vec::new();
    for (ai, name) in attributes.iter().enumerate() {
        let statistic = Statistic::Attribute(name.clone());
        let cap = mixture.label_entropy(&statistic).stage("label entropy")?;
        let mi = mi_general(&c.scenario, &obs, grid, &statistic, c.mc.n_paths, root.derive(1 + ai as u64))
            .stage(&format!("mi_general {name}"))?;
        summary.push(row!(
            name.as_str(),
            cap,
            report.half_entropy_crossing(name).unwrap_or(f64::NAN),
            report.interpolated_half_entropy_crossing(name).unwrap_or(f64::NAN),
            mi.first_crossing(0.5 * cap).unwrap_or(f64::NAN),
            interval,
            report.classifier_ties
        ));
        series.push((name.clone(), report.curve(name).iter().map(|s| (s.tau, s.mean_entropy)).collect()));
    }
    let plot = Plot {
        name: "fork_entropy.svg".into(),
        title: format!("Label entropy across {} forks", c.mc.k),
        x_label: "fork time".into(),
        y_label: "mean entropy (nats)".into(),
        series,
    };
    Ok(ExperimentOutput { tables: vec![hist, ent, summary], plots: vec![plot] })
}

fn bridge_check(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let schedule = c.schedule().expect("validated: bridge-check needs the linear bridge");
    let targets: Vec<Vec<f64>> = match &c.scenario {
        LatentScenario::Mixture(m) => m.renderings().to_vec(),
        LatentScenario::Gaussian(g) => vec![g.mean.clone()],
    };
    let rec = record_indices(grid.len(), c.rows);
    let mut moments = Table::new(
        "bridge_moments.csv",
        &["target", "t", "coordinate", "mc_mean", "analytic_mean", "mean_se", "mc_variance", "analytic_variance"],
    );
    let mut terminal = Table::new("bridge_terminal.csv", &["target", "t", "mse", "analytic_mse", "ratio"]);
    let mut series = Vec::new();
    for (k, v) in targets.iter().enumerate() {
        let n = v.len();
        // start from the mean of the initial law so the moments are deterministic
        let decay = schedule.decay(schedule.horizon);
        let y0: Vec<f64> = v.iter().map(|x| decay * x).collect();
        let mut sum = vec![0.0; rec.len() * n];
        let mut sum_sq = vec![0.0; rec.len() * n];
        let mut sq_err = Vec::with_capacity(c.mc.n_paths);
        for_each_ordered(
            c.mc.n_paths as u64,
            |i| simulate_bridge_from(&y0, v, &schedule, grid, root.derive_path(&[k as u64, i])),
            |_, p| {
                for (r, &j) in rec.iter().enumerate() {
                    for (d, x) in p.at(j).iter().enumerate() {
                        sum[r * n + d] += x;
                        sum_sq[r * n + d] += x * x;
                    }
                }
                sq_err.push(p.terminal().iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
                Ok(())
            },
        )
        .stage("bridge paths")?;
        let np = c.mc.n_paths as f64;
        let mut pts = Vec::new();
        for (r, &j) in rec.iter().enumerate() {
            let t = grid.t(j);
            let (am, av) = analytic_bridge_moments(&y0, v, t, &schedule).stage("analytic moments")?;
            for d in 0..n {
                let mean = sum[r * n + d] / np;
                let var = if c.mc.n_paths > 1 { ((sum_sq[r * n + d] - np * mean * mean) / (np - 1.0)).max(0.0) } else { 0.0 };
                moments.push(row!(k, t, d, mean, am[d], (var / np).sqrt(), var, av));
            }
            pts.push((t, sum[r * n] / np - am[0]));
        }
        let t_end = grid.end();
        let (am, av) = analytic_bridge_moments(&y0, v, t_end, &schedule).stage("analytic moments")?;
        let bias: f64 = am.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        let analytic = n as f64 * av + bias;
        let mse = sq_err.iter().sum::<f64>() / np;
        terminal.push(row!(k, t_end, mse, analytic, mse / analytic));
        series.push((format!("target {k}"), pts));
    }
    let plot = Plot {
        name: "bridge_mean_error.svg".into(),
        title: "Monte Carlo minus analytic bridge mean (first coordinate)".into(),
        x_label: "t".into(),
        y_label: "mean error".into(),
        series,
    };
    Ok(ExperimentOutput { tables: vec![moments, terminal], plots: vec![plot] })
}

fn joint_vs_bridge(c: &ExperimentConfig, grid: &TimeGrid, root: RandomStream) -> Staged<ExperimentOutput> {
    let m = c.scenario.as_mixture().stage("joint-vs-bridge")?;
    let obs = c.observation_model();
    let n = m.dim();
    let np = c.mc.n_paths;
    let mut joint: Vec<(Vec<f64>, usize)> = Vec::with_capacity(np);
    let mut clips = 0;
    for_each_ordered(
        np as u64,
        |i| simulate_joint_system(m, &obs, grid, root.derive_path(&[0, i])),
        |_, j| {
            clips += j.clip_events;
            let y = j.y_path.terminal().to_vec();
            let hit = nearest_rendering(&y, m)?.component;
            joint.push((y, hit));
            Ok(())
        },
    )
    .stage("joint system")?;
    let mut bridge: Vec<(Vec<f64>, usize)> = Vec::with_capacity(np);
    for_each_ordered(
        np as u64,
        |i| crate::information::simulate_under_prior(&c.scenario, &obs, grid, root.derive_path(&[1, i])),
        |_, p| {
            let y = p.path.terminal().to_vec();
            let hit = nearest_rendering(&y, m)?.component;
            bridge.push((y, hit));
            Ok(())
        },
    )
    .stage("latent-then-bridge")?;

    let mut freq = Table::new(
        "joint_frequencies.csv",
        &["component", "weight", "joint_count", "joint_frequency", "joint_z", "bridge_count", "bridge_frequency", "bridge_z"],
    );
    let nf = np as f64;
    let mut max_z: f64 = 0.0;
    for (k, &w) in m.weights().iter().enumerate() {
        let sd = (nf * w * (1.0 - w)).sqrt();
        let z = |count: usize| if sd > 0.0 { (count as f64 - nf * w) / sd } else { 0.0 };
        let jc = joint.iter().filter(|x| x.1 == k).count();
        let bc = bridge.iter().filter(|x| x.1 == k).count();
        max_z = max_z.max(z(jc).abs());
        freq.push(row!(k, w, jc, jc as f64 / nf, z(jc), bc, bc as f64 / nf, z(bc)));
    }
    let mut moments = Table::new(
        "joint_moments.csv",
        &["coordinate", "moment", "joint", "joint_se", "bridge", "bridge_se", "z"],
    );
    let mut max_mz: f64 = 0.0;
    for d in 0..n {
        for (moment, power) in [("mean", 1), ("second", 2)] {
            let a: Vec<f64> = joint.iter().map(|x| x.0[d].powi(power)).collect();
            let b: Vec<f64> = bridge.iter().map(|x| x.0[d].powi(power)).collect();
            let ((ma, sa), (mb, sb)) = (mean_se(&a), mean_se(&b));
            let se = (sa * sa + sb * sb).sqrt();
            let z = if se > 0.0 { (ma - mb) / se } else { 0.0 };
            max_mz = max_mz.max(z.abs());
            moments.push(row!(d, moment, ma, sa, mb, sb, z));
        }
    }
    let mut summary = Table::new("joint_summary.csv", &["n_paths", "clip_events", "max_abs_frequency_z", "max_abs_moment_z"]);
    summary.push(row!(np, clips, max_z, max_mz));
    Ok(ExperimentOutput { tables: vec![freq, moments, summary], plots: Vec::new() })
}
