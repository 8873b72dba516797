use crate::error::{Error, Result};
use crate::sde::SamplePath;

/// Log Radon–Nikodym weight of the path measure with drift `H` against the
/// drift-free reference:
/// `log psi_i = sum_{j<i} H_j . dY_j - 1/2 sum_{j<i} |H_j|^2 dt_j`,
/// with `H_j` evaluated at the left endpoint of step `j`.
///
/// Returns one value per grid point (`log psi_0 = 0`).
pub fn girsanov_logweight(path: &SamplePath, h_values: &[Vec<f64>]) -> Result<Vec<f64>> {
    let grid = path.grid();
    if h_values.len() != grid.steps() {
        return Err(Error::DimensionMismatch { expected: grid.steps(), got: h_values.len() });
    }
    let mut dy = vec![0.0; path.dim()];
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(0.0);
    for (i, h) in h_values.iter().enumerate() {
        if h.len() != path.dim() {
            return Err(Error::DimensionMismatch { expected: path.dim(), got: h.len() });
        }
        path.increment(i, &mut dy);
        acc += girsanov_increment(h, &dy, grid.dt(i));
        out.push(acc);
    }
    Ok(out)
}

/// One step of the Zakai log-weight recursion: `H . dY - |H|^2 dt / 2`.
#[inline]
pub fn girsanov_increment(h: &[f64], dy: &[f64], dt: f64) -> f64 {
    let mut dot = 0.0;
    let mut sq = 0.0;
    for (a, b) in h.iter().zip(dy) {
        dot += a * b;
        sq += a * a;
    }
    dot - 0.5 * sq * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{euler_maruyama, make_grid, sample_brownian_increments, RandomStream, Spacing};

    #[test]
    fn zero_drift_has_zero_weight() {
        let grid = make_grid(1.0, 20, 0.1, Spacing::Uniform).unwrap();
        let inc = sample_brownian_increments(&grid, 2, RandomStream::new(1, 0));
        let path = euler_maruyama(|_, _, a| a.fill(0.0), &[0.0, 0.0], &grid, &inc).unwrap();
        let lw = girsanov_logweight(&path, &vec![vec![0.0, 0.0]; 20]).unwrap();
        assert!(lw.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hand_evaluated_sums() {
        let grid = make_grid(2.0, 2, 1.0, Spacing::Uniform).unwrap();
        assert_eq!(grid.points(), &[0.0, 0.5, 1.0]);
        let path = SamplePath::new(grid, 1, vec![0.0, 1.0, 1.0]).unwrap();
        let lw = girsanov_logweight(&path, &[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(lw, vec![0.0, 0.75, 0.5]);
    }

    #[test]
    fn dimension_mismatch() {
        let grid = make_grid(2.0, 2, 1.0, Spacing::Uniform).unwrap();
        let path = SamplePath::new(grid, 1, vec![0.0, 1.0, 1.0]).unwrap();
        assert!(girsanov_logweight(&path, &[vec![1.0]]).is_err());
        assert!(girsanov_logweight(&path, &[vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn exponential_weight_is_a_martingale() {
        let grid = make_grid(1.0, 50, 1e-3, Spacing::Uniform).unwrap();
        let c = 0.8;
        let n = 10_000;
        let psi: Vec<f64> = (0..n)
            .map(|k| {
                let inc = sample_brownian_increments(&grid, 1, RandomStream::new(21, k));
                let path = euler_maruyama(|_, _, a| a[0] = 0.0, &[0.0], &grid, &inc).unwrap();
                girsanov_logweight(&path, &vec![vec![c]; 50]).unwrap().last().unwrap().exp()
            })
            .collect();
        let mean = psi.iter().sum::<f64>() / n as f64;
        let sd = (psi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * sd / (n as f64).sqrt(), "mean {mean}");
    }
}
