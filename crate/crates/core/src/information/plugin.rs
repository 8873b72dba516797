use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimators::{mi_general, simulate_under_prior};
use crate::error::{Error, Result};
use crate::filtering::{observation_mean, observation_table, ExactFilter};
use crate::mc::for_each_ordered;
use crate::models::{LatentScenario, Mixture, ObservationModel, Statistic};
use crate::sde::{purpose, RandomStream, TimeGrid};

/// Minimum average number of samples per occupied quantization cell.
pub const MIN_SAMPLES_PER_CELL: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginConfig {
    /// Quantile bins per coordinate.
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_bins() -> usize {
    20
}

fn default_bootstrap() -> usize {
    200
}

impl Default for PluginConfig {
    fn default() -> Self {
        PluginConfig { bins: 20, bootstrap: 200 }
    }
}

/// Interior quantile edges of `values` for `bins` bins, with duplicates
/// removed (atoms collapse adjacent bins).
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|j| sorted[(j * n / bins).min(n - 1)]).collect();
    edges.dedup();
    edges
}

/// Cell index of every sample: each coordinate is binned on its own
/// quantile edges and the bins are combined into one code.
pub fn quantize(samples: &[Vec<f64>], bins: usize) -> Result<Vec<u64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be >= 1".into()));
    }
    let Some(first) = samples.first() else {
        return Err(Error::EmptyHistogram);
    };
    let d = first.len();
    let mut codes = vec![0u64; samples.len()];
    for j in 0..d {
        let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        let edges = quantile_edges(&column, bins);
        for (c, x) in codes.iter_mut().zip(&column) {
            *c = *c * (bins as u64 + 1) + edges.partition_point(|e| e <= x) as u64;
        }
    }
    Ok(codes)
}

/// Plug-in `I(code; label)` in nats from the empirical joint histogram.
pub fn plugin_mi(codes: &[u64], labels: &[u32]) -> Result<f64> {
    if codes.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if codes.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: codes.len(), got: labels.len() });
    }
    let n = codes.len() as f64;
    let mut joint: HashMap<(u64, u32), f64> = HashMap::new();
    let mut pc: HashMap<u64, f64> = HashMap::new();
    let mut pl: HashMap<u32, f64> = HashMap::new();
    for (&c, &l) in codes.iter().zip(labels) {
        *joint.entry((c, l)).or_default() += 1.0;
        *pc.entry(c).or_default() += 1.0;
        *pl.entry(l).or_default() += 1.0;
    }
    let mut terms: Vec<((u64, u32), f64)> = joint.into_iter().collect();
    terms.sort_by_key(|(k, _)| *k);
    Ok(terms
        .iter()
        .map(|((c, l), nj)| nj / n * (nj * n / (pc[c] * pl[l])).ln())
        .sum::<f64>()
        .max(0.0))
}

fn check_occupancy(codes: &[u64]) -> Result<()> {
    let mut cells: Vec<u64> = codes.to_vec();
    cells.sort_unstable();
    cells.dedup();
    if (codes.len() as f64) < MIN_SAMPLES_PER_CELL * cells.len() as f64 {
        return Err(Error::QuantizationOccupancy { occupied: cells.len(), samples: codes.len() });
    }
    Ok(())
}

/// Plug-in estimate with a bootstrap standard error over samples.
pub fn plugin_mi_bootstrap(codes: &[u64], labels: &[u32], resamples: usize, stream: RandomStream) -> Result<(f64, f64)> {
    check_occupancy(codes)?;
    let value = plugin_mi(codes, labels)?;
    if resamples < 2 {
        return Ok((value, 0.0));
    }
    let n = codes.len();
    let mut rng = stream.rng();
    let mut bc = vec![0u64; n];
    let mut bl = vec![0u32; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for j in 0..n {
            let i = rng.random_range(0..n);
            bc[j] = codes[i];
            bl[j] = labels[i];
        }
        stats.push(plugin_mi(&bc, &bl)?);
    }
    let m = stats.iter().sum::<f64>() / resamples as f64;
    let var = stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok((value, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiRow {
    pub t: f64,
    pub i_full: f64,
    pub i_full_se: f64,
    pub i_pi: f64,
    pub i_pi_se: f64,
    pub i_projection: f64,
    pub i_projection_se: f64,
}

impl DpiRow {
    fn combined(a: f64, b: f64) -> f64 {
        (a * a + b * b).sqrt()
    }

    /// `|I(pi_t; phi) - I(Y_{0:t}; phi)|` in units of the combined error.
    pub fn sufficiency_z(&self) -> f64 {
        let s = Self::combined(self.i_pi_se, self.i_full_se);
        if s == 0.0 {
            return if self.i_pi == self.i_full { 0.0 } else { f64::INFINITY };
        }
        (self.i_pi - self.i_full).abs() / s
    }

    /// `I(<pi_t, H>; phi) - I(Y_{0:t}; phi)` in units of the combined error;
    /// the data-processing inequality asks for this to be at most a few units.
    pub fn dpi_z(&self) -> f64 {
        let s = Self::combined(self.i_projection_se, self.i_full_se);
        let gap = self.i_projection - self.i_full;
        if s == 0.0 {
            return if gap <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        gap / s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpiReport {
    pub rows: Vec<DpiRow>,
    pub n_paths: usize,
    pub config: PluginConfig,
}

/// Compares `I(Y_{0:t}; phi)` with the plug-in information carried by the
/// filter `pi_t` and by the filtered drift `<pi_t, H>` at `times`.
#[allow(clippy::too_many_arguments)]
pub fn dpi_check(
    mixture: &Mixture,
    obs: &ObservationModel,
    grid: &TimeGrid,
    statistic: &Statistic,
    n_paths: usize,
    stream: RandomStream,
    times: &[f64],
    config: &PluginConfig,
) -> Result<DpiReport> {
    if mixture.len() > 4 {
        return Err(Error::InvalidArgument(format!(
            "plug-in estimation supports at most 4 components, got {}",
            mixture.len()
        )));
    }
    let scenario = LatentScenario::Mixture(mixture.clone());
    let full = mi_general(&scenario, obs, grid, statistic, n_paths, stream)?;
    let idx: Vec<usize> = times.iter().map(|&t| grid.nearest_index(t)).collect();
    let (labels, _) = mixture.labels(statistic)?;
    let k = mixture.len();
    let n = mixture.dim();
    // per path: label, then per time (pi without its last entry, <pi, H>)
    type Sample = (u32, Vec<(Vec<f64>, Vec<f64>)>);
    let mut samples: Vec<Sample> = Vec::with_capacity(n_paths);
    for_each_ordered(
        n_paths as u64,
        |i| {
            let p = simulate_under_prior(&scenario, obs, grid, stream.derive(i))?;
            let path = &p.path;
            let mut f = ExactFilter::with_support(mixture, obs, None, path.at(0))?;
            let mut table = vec![0.0; k * n];
            let (mut h, mut dy) = (vec![0.0; n], vec![0.0; n]);
            let last = idx.iter().copied().max().unwrap_or(0);
            let mut snap: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; last + 1];
            for &j in &idx {
                snap[j] = Some((Vec::new(), Vec::new()));
            }
            for step in 0..=last {
                observation_table(mixture, obs, path.at(step), grid.t(step), &mut table)?;
                if let Some(slot) = snap[step].as_mut() {
                    observation_mean(f.posterior(), &table, &mut h);
                    *slot = (f.posterior()[..k - 1].to_vec(), h.clone());
                }
                if step < last {
                    path.increment(step, &mut dy);
                    f.update(&table, &dy, grid.dt(step))?;
                }
            }
            let ordered = idx.iter().map(|&j| snap[j].clone().expect("recorded")).collect();
            Ok((labels[p.component.expect("mixture path")], ordered))
        },
        |_, s| {
            samples.push(s);
            Ok(())
        },
    )?;
    let path_labels: Vec<u32> = samples.iter().map(|s| s.0).collect();
    let boot = stream.derive(purpose::RESAMPLE);
    let mut rows = Vec::with_capacity(times.len());
    for (j, &gi) in idx.iter().enumerate() {
        let (i_full, i_full_se) = (full.cumulative[gi], full.stderr[gi]);
        let pis: Vec<Vec<f64>> = samples.iter().map(|s| s.1[j].0.clone()).collect();
        let hs: Vec<Vec<f64>> = samples.iter().map(|s| s.1[j].1.clone()).collect();
        let (i_pi, i_pi_se) =
            plugin_mi_bootstrap(&quantize(&pis, config.bins)?, &path_labels, config.bootstrap, boot.derive_path(&[j as u64, 0]))?;
        let (i_projection, i_projection_se) =
            plugin_mi_bootstrap(&quantize(&hs, config.bins)?, &path_labels, config.bootstrap, boot.derive_path(&[j as u64, 1]))?;
        rows.push(DpiRow { t: grid.t(gi), i_full, i_full_se, i_pi, i_pi_se, i_projection, i_projection_se });
    }
    Ok(DpiReport { rows, n_paths, config: *config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Schedule;
    use crate::sde::{make_grid, Spacing};
    use proptest::prelude::*;

    #[test]
    fn plugin_values() {
        assert_eq!(plugin_mi(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        let v = plugin_mi(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!(plugin_mi(&[], &[]).is_err());
    }

    #[test]
    fn quantile_bins_are_balanced_and_deduplicated() {
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let c = quantize(&xs, 4).unwrap();
        for b in 0..4 {
            assert_eq!(c.iter().filter(|&&x| x == b).count(), 25);
        }
        let atoms: Vec<Vec<f64>> = (0..100).map(|i| vec![if i < 90 { 1.0 } else { i as f64 }]).collect();
        let c = quantize(&atoms, 10).unwrap();
        assert_eq!(c.iter().filter(|&&x| x == c[0]).count(), 90);
    }

    #[test]
    fn sparse_cells_are_rejected() {
        let codes: Vec<u64> = (0..20).collect();
        assert!(matches!(
            plugin_mi_bootstrap(&codes, &[0; 20], 10, RandomStream::new(0, 0)),
            Err(Error::QuantizationOccupancy { .. })
        ));
    }

    #[test]
    fn constant_statistic_everything_vanishes() {
        let m = Mixture::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![]).unwrap();
        let obs = ObservationModel::LinearBridge(Schedule::brownian(1.0));
        let grid = make_grid(1.0, 100, 1e-2, Spacing::Uniform).unwrap();
        let r = dpi_check(&m, &obs, &grid, &Statistic::Constant, 200, RandomStream::new(0, 0), &[0.5, 0.9], &PluginConfig::default())
            .unwrap();
        for row in r.rows {
            assert_eq!((row.i_full, row.i_pi, row.i_projection), (0.0, 0.0, 0.0));
        }
    }

    proptest! {
        #[test]
        fn plugin_is_bounded_by_label_entropy(raw in proptest::collection::vec((0u64..6, 0u32..3), 1..200)) {
            let (codes, labels): (Vec<u64>, Vec<u32>) = raw.into_iter().unzip();
            let v = plugin_mi(&codes, &labels).unwrap();
            let n = labels.len() as f64;
            let h: f64 = (0..3)
                .map(|l| labels.iter().filter(|&&x| x == l).count() as f64 / n)
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum();
            prop_assert!(v >= 0.0 && v <= h + 1e-12);
        }
    }
}
