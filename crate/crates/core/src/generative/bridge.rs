use crate::error::{Error, Result};
use crate::models::{ObservationModel, Schedule};
use crate::sde::{euler_maruyama, purpose, sample_brownian_increments, RandomStream, SamplePath, TimeGrid};

/// Largest `f(t) dt` for which the explicit step does not amplify `Y`.
pub const MAX_STEP_RATIO: f64 = 2.0;

pub(crate) fn check_step_ratio(schedule: &Schedule, grid: &TimeGrid) -> Result<()> {
    for i in 0..grid.steps() {
        let ratio = schedule.f(grid.t(i))? * grid.dt(i);
        if ratio > MAX_STEP_RATIO {
            return Err(Error::UnstableStep { t: grid.t(i), ratio });
        }
    }
    Ok(())
}

/// Draws `Y_0` from the observation model's initial law given `v`.
pub fn sample_initial_state(obs: &ObservationModel, v: &[f64], stream: RandomStream) -> Vec<f64> {
    obs.initial_law(v).sample(&mut stream.derive(purpose::INITIAL).rng())
}

/// Bridge to a known rendering `v` with `Y_0` drawn from the forward
/// marginal at reversed time `T`.
pub fn simulate_bridge(v: &[f64], obs: &ObservationModel, grid: &TimeGrid, stream: RandomStream) -> Result<SamplePath> {
    let schedule = obs
        .schedule()
        .ok_or_else(|| Error::InvalidArgument("bridge simulation needs the linear-bridge observation model".into()))?;
    let y0 = sample_initial_state(obs, v, stream);
    simulate_bridge_from(&y0, v, schedule, grid, stream)
}

/// Euler–Maruyama simulation of the linear bridge
/// `dY = (m(t) v - f(t) Y) dt + dW` from `y0`, reported at `T - epsilon`.
pub fn simulate_bridge_from(y0: &[f64], v: &[f64], schedule: &Schedule, grid: &TimeGrid, stream: RandomStream) -> Result<SamplePath> {
    if y0.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: y0.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("bridge target must be finite".into()));
    }
    check_step_ratio(schedule, grid)?;
    let inc = sample_brownian_increments(grid, v.len(), stream.derive(purpose::INCREMENTS));
    let coeffs: Vec<(f64, f64)> = (0..grid.steps())
        .map(|i| Ok((schedule.m(grid.t(i))?, schedule.f(grid.t(i))?)))
        .collect::<Result<_>>()?;
    let mut step = 0;
    euler_maruyama(
        |y, _, a| {
            let (m, f) = coeffs[step];
            for ((ai, yi), vi) in a.iter_mut().zip(y).zip(v) {
                *ai = m * vi - f * yi;
            }
            step += 1;
        },
        y0,
        grid,
        &inc,
    )
}

/// Noise-free bridge: the ODE limit of [`simulate_bridge`].
pub fn deterministic_bridge(y0: &[f64], v: &[f64], schedule: &Schedule, grid: &TimeGrid) -> Result<SamplePath> {
    check_step_ratio(schedule, grid)?;
    let inc = crate::sde::Increments::zeros(grid, v.len());
    euler_maruyama(
        |y, t, a| {
            let (m, f) = (schedule.m(t).unwrap_or(f64::NAN), schedule.f(t).unwrap_or(f64::NAN));
            for ((ai, yi), vi) in a.iter_mut().zip(y).zip(v) {
                *ai = m * vi - f * yi;
            }
        },
        y0,
        grid,
        &inc,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::analytic_bridge_moments;
    use crate::sde::{make_grid, Spacing};

    #[test]
    fn ode_limit_pins_to_target() {
        let s = Schedule::new(1.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let grid = make_grid(1.0, 2000, eps, Spacing::refined()).unwrap();
            let p = deterministic_bridge(&[0.4], &[-1.5], &s, &grid).unwrap();
            let err = (p.terminal()[0] + 1.5).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 5e-3, "{last}");
    }

    #[test]
    fn coarse_grid_near_horizon_is_rejected() {
        let s = Schedule::new(50.0, 1.0).unwrap();
        let grid = make_grid(1.0, 10, 1e-4, Spacing::Uniform).unwrap();
        assert!(matches!(
            simulate_bridge_from(&[0.0], &[1.0], &s, &grid, RandomStream::new(0, 0)),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn mean_follows_analytic_moments() {
        let s = Schedule::new(1.0, 1.0).unwrap();
        let grid = make_grid(1.0, 500, 1e-3, Spacing::refined()).unwrap();
        let n = 2000;
        let idx = [100, 250, 450, 500];
        let mut sums = [0.0; 4];
        let mut sq = [0.0; 4];
        for k in 0..n {
            let p = simulate_bridge_from(&[0.5], &[2.0], &s, &grid, RandomStream::new(77, k)).unwrap();
            for (j, &i) in idx.iter().enumerate() {
                sums[j] += p.at(i)[0];
                sq[j] += p.at(i)[0].powi(2);
            }
        }
        for (j, &i) in idx.iter().enumerate() {
            let (m, var) = analytic_bridge_moments(&[0.5], &[2.0], grid.t(i), &s).unwrap();
            let mean = sums[j] / n as f64;
            let sd = (sq[j] / n as f64 - mean * mean).sqrt();
            assert!((mean - m[0]).abs() < 3.0 * sd.max(1e-3) / (n as f64).sqrt() + 1e-3, "i={i}");
            assert!((sd * sd / var - 1.0).abs() < 0.15, "var at i={i}: {} vs {var}", sd * sd);
        }
    }

    #[test]
    fn brownian_bridge_terminal_spread() {
        let s = Schedule::brownian(1.0);
        let obs = ObservationModel::LinearBridge(s);
        let eps = 1e-3;
        let grid = make_grid(1.0, 1000, eps, Spacing::refined()).unwrap();
        let n = 1000;
        let mse: f64 = (0..n)
            .map(|k| {
                let p = simulate_bridge(&[0.7], &obs, &grid, RandomStream::new(5, k)).unwrap();
                (p.terminal()[0] - 0.7).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let target = eps * (1.0 - eps);
        assert!((mse / target - 1.0).abs() < 0.2, "{mse} vs {target}");
    }
}
