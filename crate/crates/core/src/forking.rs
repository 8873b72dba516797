//! Forking measurements: branch the generative process at time `tau` into
//! `k` independent continuations and measure how much the terminal labels
//! still disagree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::{nearest_rendering, GenerativeSampler, SamplerConfig, SamplerNoise, SamplerState};
use crate::mc::for_each_ordered;
use crate::models::{Mixture, ScoreModel, Statistic, COMPONENT_ATTRIBUTE};
use crate::sde::{purpose, RandomStream, TimeGrid};

/// Number of fork times used when none are given.
pub const DEFAULT_TAU_POINTS: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkConfig {
    /// Fork times in `[0, T - epsilon]`; empty means
    /// [`DEFAULT_TAU_POINTS`] uniform points over that range.
    #[serde(default)]
    pub tau_list: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    /// Defaults to the backward score SDE without corrector. Langevin
    /// corrector steps keep every marginal but mix pathways across
    /// components, which delays commitment of the forks.
    #[serde(default = "SamplerConfig::backward")]
    pub sampler: SamplerConfig,
    /// Attributes to report; empty means every attribute of the scenario,
    /// or the component index if it has none.
    #[serde(default)]
    pub attributes: Vec<String>,
    /// Classify by nearest rendering instead of the Bayes posterior.
    #[serde(default)]
    pub snap_to_nearest: bool,
}

fn default_k() -> usize {
    100
}

fn default_seeds() -> usize {
    10
}

impl Default for ForkConfig {
    fn default() -> Self {
        ForkConfig {
            tau_list: Vec::new(),
            k: 100,
            n_seeds: 10,
            sampler: SamplerConfig::backward(),
            attributes: Vec::new(),
            snap_to_nearest: false,
        }
    }
}

impl ForkConfig {
    pub fn problems(&self, grid: &TimeGrid) -> Vec<String> {
        let mut out = self.sampler.problems();
        if self.k < 2 {
            out.push(format!("k must be >= 2, got {}", self.k));
        }
        if self.n_seeds == 0 {
            out.push("n_seeds must be >= 1".to_string());
        }
        let end = grid.end();
        for &tau in &self.tau_list {
            if !(tau >= 0.0 && tau <= end + 1e-12 * grid.horizon()) {
                out.push(format!("tau {tau} outside [0, {end}]"));
            }
        }
        out
    }

    /// The fork times in use and their grid indices.
    pub fn resolved_taus(&self, grid: &TimeGrid) -> Vec<(f64, usize)> {
        let taus: Vec<f64> = if self.tau_list.is_empty() {
            let n = DEFAULT_TAU_POINTS - 1;
            (0..=n).map(|i| grid.end() * i as f64 / n as f64).collect()
        } else {
            self.tau_list.clone()
        };
        taus.into_iter()
            .map(|t| {
                let i = grid.nearest_index(t);
                (grid.t(i), i)
            })
            .collect()
    }

    fn resolved_attributes(&self, mixture: &Mixture) -> Vec<String> {
        if !self.attributes.is_empty() {
            return self.attributes.clone();
        }
        let names: Vec<String> = mixture.attributes().iter().map(|a| a.name.clone()).collect();
        if names.is_empty() {
            vec![COMPONENT_ATTRIBUTE.to_string()]
        } else {
            names
        }
    }
}

/// Label histogram of the `k` forks of one trunk at one fork time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkHistogram {
    pub seed: usize,
    pub tau: f64,
    pub attribute: String,
    pub counts: Vec<usize>,
    pub entropy: f64,
}

/// Entropy averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkSummary {
    pub tau: f64,
    pub attribute: String,
    pub mean_entropy: f64,
    pub stderr: f64,
    pub prior_entropy: f64,
    /// [`expected_plugin_entropy`] of the attribute's prior label law.
    pub null_entropy: f64,
    /// [`plugin_entropy_sd`] of the prior label law over `sqrt(n_seeds)`:
    /// the standard error of `mean_entropy` when the forks share nothing.
    pub null_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForkReport {
    pub histograms: Vec<ForkHistogram>,
    pub summary: Vec<ForkSummary>,
    /// Terminal states whose maximal responsibility was attained by more
    /// than one component (resolved to the lowest index).
    pub classifier_ties: usize,
}

impl ForkReport {
    pub fn curve(&self, attribute: &str) -> Vec<&ForkSummary> {
        self.summary.iter().filter(|s| s.attribute == attribute).collect()
    }

    /// First fork time at which the mean entropy drops below half of the
    /// prior entropy.
    pub fn half_entropy_crossing(&self, attribute: &str) -> Option<f64> {
        self.curve(attribute)
            .into_iter()
            .find(|s| s.mean_entropy < 0.5 * s.prior_entropy)
            .map(|s| s.tau)
    }

    /// Like [`half_entropy_crossing`](Self::half_entropy_crossing), but
    /// interpolated linearly between the two fork times that bracket the
    /// half level.
    pub fn interpolated_half_entropy_crossing(&self, attribute: &str) -> Option<f64> {
        let curve = self.curve(attribute);
        let first = curve.first()?;
        let half = 0.5 * first.prior_entropy;
        if first.mean_entropy < half {
            return Some(first.tau);
        }
        curve.windows(2).find(|w| w[1].mean_entropy < half).map(|w| {
            let (a, b) = (w[0], w[1]);
            a.tau + (a.mean_entropy - half) / (a.mean_entropy - b.mean_entropy) * (b.tau - a.tau)
        })
    }
}

/// `-sum p ln p` of a histogram, in nats.
pub fn entropy(histogram: &[usize]) -> Result<f64> {
    let total: usize = histogram.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let n = total as f64;
    Ok(histogram
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Expected plug-in entropy of `k` independent draws from `probs`. The
/// plug-in estimator is biased low by roughly `(L - 1) / (2k)`; this is the
/// value the fork entropy should take when the forks share no information.
pub fn expected_plugin_entropy(probs: &[f64], k: usize) -> f64 {
    // Linearity over labels: each count is Binomial(k, p).
    let n = k as f64;
    probs
        .iter()
        .filter(|&&p| p > 0.0 && p < 1.0)
        .map(|&p| {
            let mut log_pmf = n * (1.0 - p).ln();
            let mut acc = 0.0;
            for c in 1..=k {
                let c = c as f64;
                log_pmf += ((n - c + 1.0) / c).ln() + (p / (1.0 - p)).ln();
                let q = c / n;
                acc -= log_pmf.exp() * q * q.ln();
            }
            acc
        })
        .sum()
}

/// Standard deviation of the plug-in entropy of `k` independent draws from
/// `probs`, by exact summation over the binomial and trinomial laws of one
/// and two label counts.
pub fn plugin_entropy_sd(probs: &[f64], k: usize) -> f64 {
    let n = k as f64;
    let mut ln_fact = vec![0.0; k + 1];
    for c in 1..=k {
        ln_fact[c] = ln_fact[c - 1] + (c as f64).ln();
    }
    let g = |c: usize| {
        let q = c as f64 / n;
        if c == 0 {
            0.0
        } else {
            -q * q.ln()
        }
    };
    let lp = |c: usize, p: f64| match (c, p > 0.0) {
        (0, _) => 0.0,
        (_, false) => f64::NEG_INFINITY,
        _ => c as f64 * p.ln(),
    };
    let p: Vec<f64> = probs.iter().copied().filter(|&p| p > 0.0).collect();
    let (mut mean, mut second) = (0.0, 0.0);
    for (a, &pa) in p.iter().enumerate() {
        for c in 1..=k {
            let w = (ln_fact[k] - ln_fact[c] - ln_fact[k - c] + lp(c, pa) + lp(k - c, (1.0 - pa).max(0.0))).exp();
            mean += w * g(c);
            second += w * g(c) * g(c);
        }
        for (b, &pb) in p.iter().enumerate() {
            if a == b {
                continue;
            }
            let rest = (1.0 - pa - pb).max(0.0);
            for ca in 1..k {
                for cb in 1..=k - ca {
                    let r = k - ca - cb;
                    let w = (ln_fact[k] - ln_fact[ca] - ln_fact[cb] - ln_fact[r] + lp(ca, pa) + lp(cb, pb) + lp(r, rest)).exp();
                    second += w * g(ca) * g(cb);
                }
            }
        }
    }
    (second - mean * mean).max(0.0).sqrt()
}

/// Posterior argmax over components at `(y, t)`, with ties resolved to the
/// lowest index. The flag reports whether a tie occurred.
pub fn bayes_classifier_with_ties(y: &[f64], t: f64, model: &ScoreModel) -> Result<(usize, bool)> {
    model.scenario().as_mixture()?;
    let lr = model.log_responsibilities(y, t, None)?;
    let mut best = 0;
    let mut tie = false;
    for (k, &v) in lr.iter().enumerate().skip(1) {
        if v > lr[best] {
            best = k;
            tie = false;
        } else if v == lr[best] {
            tie = true;
        }
    }
    Ok((best, tie))
}

pub fn bayes_classifier(y: &[f64], t: f64, model: &ScoreModel) -> Result<usize> {
    Ok(bayes_classifier_with_ties(y, t, model)?.0)
}

/// Runs the forking protocol. For every seed a trunk is integrated once
/// through all fork times; at each fork time `k` copies of the trunk state
/// continue under their own streams to `T - epsilon` and are classified.
pub fn run_forking(model: &ScoreModel, config: &ForkConfig, grid: &TimeGrid, stream: RandomStream) -> Result<ForkReport> {
    let mixture = model.scenario().as_mixture()?;
    if let Some(p) = config.problems(grid).into_iter().next() {
        return Err(Error::InvalidArgument(p));
    }
    let sampler = GenerativeSampler::from_score_model(model, config.sampler)?;
    sampler.check_grid(grid)?;
    let taus = config.resolved_taus(grid);
    let attributes = config.resolved_attributes(mixture);
    let label_tables: Vec<(Vec<u32>, usize)> = attributes
        .iter()
        .map(|a| mixture.labels(&Statistic::Attribute(a.clone())))
        .collect::<Result<_>>()?;
    let root = stream.derive(purpose::FORKS);

    // Trunk states at every fork time, seed by seed.
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by_key(|&j| taus[j].1);
    let mut trunks: Vec<Vec<SamplerState>> = Vec::with_capacity(config.n_seeds);
    for_each_ordered(
        config.n_seeds as u64,
        |s| {
            let ts = root.derive(s);
            let mut state = sampler.initial_state(ts)?;
            let mut noise = SamplerNoise::new(ts);
            let mut at = 0;
            let mut out = vec![None; taus.len()];
            for &j in &order {
                sampler.advance(&mut state, grid, at, taus[j].1, &mut noise)?;
                at = taus[j].1;
                out[j] = Some(state.clone());
            }
            Ok(out.into_iter().map(|s| s.expect("every fork time visited")).collect::<Vec<_>>())
        },
        |_, t| {
            trunks.push(t);
            Ok(())
        },
    )?;

    let (k, nt) = (config.k as u64, taus.len() as u64);
    let total = config.n_seeds as u64 * nt * k;
    let t_end = grid.end();
    let mut classes = Vec::with_capacity(total as usize);
    let mut ties = 0;
    for_each_ordered(
        total,
        |i| {
            let (s, j, f) = (i / (nt * k), (i / k) % nt, i % k);
            let mut state = trunks[s as usize][j as usize].clone();
            let mut noise = SamplerNoise::new(root.derive_path(&[s, j, f]));
            sampler.advance(&mut state, grid, taus[j as usize].1, grid.steps(), &mut noise)?;
            if config.snap_to_nearest {
                Ok((nearest_rendering(&state.y, mixture)?.component, false))
            } else {
                bayes_classifier_with_ties(&state.y, t_end, model)
            }
        },
        |_, (c, tie)| {
            classes.push(c);
            ties += tie as usize;
            Ok(())
        },
    )?;

    let mut histograms = Vec::new();
    for s in 0..config.n_seeds {
        for (j, &(tau, _)) in taus.iter().enumerate() {
            let base = (s * taus.len() + j) * config.k;
            let forks = &classes[base..base + config.k];
            for (name, (labels, count)) in attributes.iter().zip(&label_tables) {
                let mut counts = vec![0; *count];
                for &c in forks {
                    counts[labels[c] as usize] += 1;
                }
                let entropy = entropy(&counts)?;
                histograms.push(ForkHistogram { seed: s, tau, attribute: name.clone(), counts, entropy });
            }
        }
    }

    let mut summary = Vec::new();
    for &(tau, _) in &taus {
        for name in &attributes {
            let statistic = Statistic::Attribute(name.clone());
            let prior_entropy = mixture.label_entropy(&statistic)?;
            let (labels, count) = mixture.labels(&statistic)?;
            let mut probs = vec![0.0; count];
            for (w, &l) in mixture.weights().iter().zip(&labels) {
                probs[l as usize] += w;
            }
            let null_entropy = expected_plugin_entropy(&probs, config.k);
            let null_stderr = plugin_entropy_sd(&probs, config.k) / (config.n_seeds as f64).sqrt();
            let hs: Vec<f64> = histograms
                .iter()
                .filter(|h| h.attribute == *name && h.tau == tau)
                .map(|h| h.entropy)
                .collect();
            let n = hs.len() as f64;
            let mean = hs.iter().sum::<f64>() / n;
            let stderr = if hs.len() > 1 {
                (hs.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            summary.push(ForkSummary {
                tau,
                attribute: name.clone(),
                mean_entropy: mean,
                stderr,
                prior_entropy,
                null_entropy,
                null_stderr,
            });
        }
    }
    Ok(ForkReport { histograms, summary, classifier_ties: ties })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LatentScenario, Schedule};
    use crate::sde::{make_grid, Spacing};

    #[test]
    fn plugin_bias_matches_enumeration() {
        // Direct enumeration of Binomial(4, 0.3).
        let (k, p) = (4usize, 0.3f64);
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let mut direct = 0.0;
        for c in 0..=k {
            let pmf = binom[c] * p.powi(c as i32) * (1.0 - p).powi((k - c) as i32);
            direct += pmf * entropy(&[c, k - c]).unwrap();
        }
        assert!((expected_plugin_entropy(&[p, 1.0 - p], k) - direct).abs() < 1e-12);
        let e = expected_plugin_entropy(&[0.5, 0.5], 100);
        assert!((2f64.ln() - e - 1.0 / 200.0).abs() < 5e-4, "{e}");
        assert_eq!(expected_plugin_entropy(&[1.0], 100), 0.0);
    }

    #[test]
    fn plugin_spread_matches_enumeration() {
        // every sequence of 5 draws over 3 labels
        let (k, probs) = (5usize, [0.2, 0.3, 0.5]);
        let (mut m1, mut m2) = (0.0, 0.0);
        for code in 0..3usize.pow(k as u32) {
            let (mut counts, mut w, mut c) = ([0usize; 3], 1.0, code);
            for _ in 0..k {
                counts[c % 3] += 1;
                w *= probs[c % 3];
                c /= 3;
            }
            let h = entropy(&counts).unwrap();
            m1 += w * h;
            m2 += w * h * h;
        }
        let sd = (m2 - m1 * m1).sqrt();
        assert!((plugin_entropy_sd(&probs, k) - sd).abs() < 1e-12, "{sd}");
        assert!((expected_plugin_entropy(&probs, k) - m1).abs() < 1e-12);
        // uniform binary: the plug-in entropy is ln 2 - chi2_1 / (2k) to leading order
        let s = plugin_entropy_sd(&[0.5, 0.5], 100);
        assert!((s - 0.5f64.sqrt() / 100.0).abs() < 1e-3, "{s}");
        assert_eq!(plugin_entropy_sd(&[1.0], 100), 0.0);
    }

    #[test]
    fn crossings_on_the_grid_and_interpolated() {
        let point = |tau: f64, mean_entropy: f64| ForkSummary {
            tau,
            attribute: "a".into(),
            mean_entropy,
            stderr: 0.0,
            prior_entropy: 1.0,
            null_entropy: 1.0,
            null_stderr: 0.0,
        };
        let report = ForkReport {
            histograms: Vec::new(),
            summary: vec![point(0.0, 1.0), point(1.0, 0.7), point(2.0, 0.3), point(3.0, 0.0)],
            classifier_ties: 0,
        };
        assert_eq!(report.half_entropy_crossing("a"), Some(2.0));
        assert!((report.interpolated_half_entropy_crossing("a").unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(report.half_entropy_crossing("b"), None);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[7, 0, 0]).unwrap(), 0.0);
        assert!((entropy(&[5, 5, 5, 5]).unwrap() - 4f64.ln()).abs() < 1e-15);
        let e = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((entropy(&[3, 1]).unwrap() - e).abs() < 1e-15);
        assert!((entropy(&[3, 1]).unwrap() - 0.5623).abs() < 1e-4);
        assert_eq!(entropy(&[0, 0]), Err(Error::EmptyHistogram));
    }

    fn model() -> ScoreModel {
        let m = Mixture::new(vec![0.5, 0.5], vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![]).unwrap();
        ScoreModel::new(LatentScenario::Mixture(m), Schedule::new(1.0, 1.0).unwrap())
    }

    #[test]
    fn classifier_hits_and_ties() {
        let m = model();
        assert_eq!(bayes_classifier(&[1.0, 0.0], 0.99, &m).unwrap(), 1);
        assert_eq!(bayes_classifier_with_ties(&[0.0, 0.3], 0.5, &m).unwrap(), (0, true));
    }

    #[test]
    fn classifier_matches_nearest_rendering_for_equal_weights() {
        let model = model();
        let mix = model.scenario().as_mixture().unwrap().clone();
        for (i, y) in [[0.2, 1.0], [-0.1, -3.0], [0.7, 0.0], [-2.0, 0.4]].iter().enumerate() {
            let t = 0.1 + 0.2 * i as f64;
            let near = nearest_rendering(y, &mix).unwrap().component;
            // Scaling by the decay keeps the nearest-point ordering.
            assert_eq!(bayes_classifier(y, t, &model).unwrap(), near);
        }
    }

    #[test]
    fn default_taus_span_the_grid() {
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let t = ForkConfig::default().resolved_taus(&grid);
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], (0.0, 0));
        assert_eq!(t[10].1, 100);
        let bad = ForkConfig { tau_list: vec![1.5], k: 1, ..Default::default() };
        assert_eq!(bad.problems(&grid).len(), 2);
    }

    #[test]
    fn endpoints_and_determinism() {
        let model = model();
        let grid = make_grid(1.0, 200, 1e-3, Spacing::refined()).unwrap();
        let cfg = ForkConfig { tau_list: vec![0.0, grid.end()], k: 40, n_seeds: 4, ..Default::default() };
        let r = run_forking(&model, &cfg, &grid, RandomStream::new(3, 0)).unwrap();
        assert_eq!(r, run_forking(&model, &cfg, &grid, RandomStream::new(3, 0)).unwrap());
        let c = r.curve(COMPONENT_ATTRIBUTE);
        assert!(c[0].mean_entropy > 0.5, "{}", c[0].mean_entropy);
        assert!(c[1].mean_entropy < 0.05, "{}", c[1].mean_entropy);
        for h in &r.histograms {
            assert_eq!(h.counts.iter().sum::<usize>(), 40);
            assert!(h.entropy >= 0.0 && h.entropy <= 2f64.ln() + 1e-12);
        }
    }
}
