use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placement of the grid points on `[0, T - epsilon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Spacing {
    Uniform,
    /// The last tenth of `[0, T - epsilon]` receives `fraction` of the steps,
    /// spaced geometrically in the distance to `T`. The remaining steps are
    /// uniform on the first nine tenths.
    GeometricRefined { fraction: f64 },
}

impl Spacing {
    pub fn refined() -> Self {
        Spacing::GeometricRefined { fraction: 0.5 }
    }
}

/// Ordered time mesh on `[0, T - epsilon]`. The horizon `T` itself is never a
/// grid point: the bridge drifts are singular there.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    horizon: f64,
    epsilon: f64,
    spacing: Spacing,
}

/// Builds a grid of `steps + 1` points covering `[0, horizon - epsilon]`.
pub fn make_grid(horizon: f64, steps: usize, epsilon: f64, spacing: Spacing) -> Result<TimeGrid> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidGrid(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon >= horizon {
        return Err(Error::InvalidGrid(format!(
            "epsilon ({epsilon}) must be smaller than the horizon ({horizon})"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidGrid("step count must be at least 1".into()));
    }
    let end = horizon - epsilon;
    let points = match spacing {
        Spacing::Uniform => uniform(0.0, end, steps),
        Spacing::GeometricRefined { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidGrid(format!(
                    "refinement fraction must lie in (0, 1), got {fraction}"
                )));
            }
            if steps < 2 {
                return Err(Error::InvalidGrid("refined spacing needs at least 2 steps".into()));
            }
            let tail = ((fraction * steps as f64).round() as usize).clamp(1, steps - 1);
            let head = steps - tail;
            let split = 0.9 * end;
            let mut pts = uniform(0.0, split, head);
            // distance to T decays geometrically from T - split down to epsilon
            let d0 = horizon - split;
            let ratio = (epsilon / d0).powf(1.0 / tail as f64);
            let mut d = d0;
            for i in 1..=tail {
                d *= ratio;
                let t = if i == tail { end } else { horizon - d };
                pts.push(t);
            }
            pts
        }
    };
    TimeGrid::from_points(points, horizon, epsilon, spacing)
}

fn uniform(a: f64, b: f64, steps: usize) -> Vec<f64> {
    let dt = (b - a) / steps as f64;
    let mut pts: Vec<f64> = (0..=steps).map(|i| a + dt * i as f64).collect();
    pts[steps] = b;
    pts
}

impl TimeGrid {
    fn from_points(points: Vec<f64>, horizon: f64, epsilon: f64, spacing: Spacing) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("a grid needs at least 2 points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must start at 0".into()));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(format!(
                "grid is not strictly increasing near t = {}",
                w[0]
            )));
        }
        Ok(TimeGrid { points, horizon, epsilon, spacing })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of steps (intervals).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn t(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Width of step `i`, i.e. `t[i+1] - t[i]`.
    pub fn dt(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    pub fn dts(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[1] - w[0])
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let pos = self.points.partition_point(|&p| p < t);
        if pos == 0 {
            0
        } else if pos >= self.points.len() {
            self.points.len() - 1
        } else if (self.points[pos] - t).abs() < (t - self.points[pos - 1]).abs() {
            pos
        } else {
            pos - 1
        }
    }

    /// Every `stride`-th point. The last point must be kept, so `stride` has
    /// to divide the step count.
    pub fn subsample(&self, stride: usize) -> Result<TimeGrid> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} does not divide {} steps",
                self.steps()
            )));
        }
        let points = self.points.iter().copied().step_by(stride).collect();
        TimeGrid::from_points(points, self.horizon, self.epsilon, self.spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_epsilon() {
        let err = make_grid(1.0, 2, 0.0, Spacing::Uniform).unwrap_err();
        assert!(matches!(err, Error::InvalidGrid(ref m) if m.contains("epsilon must be positive")));
    }

    #[test]
    fn rejects_epsilon_at_horizon_and_zero_steps() {
        assert!(make_grid(1.0, 2, 1.0, Spacing::Uniform).is_err());
        assert!(make_grid(1.0, 2, 1.5, Spacing::Uniform).is_err());
        assert!(make_grid(1.0, 0, 0.1, Spacing::Uniform).is_err());
    }

    #[test]
    fn small_uniform_grid() {
        let g = make_grid(1.0, 2, 0.5, Spacing::Uniform).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5]);
    }

    #[test]
    fn thousand_step_grid() {
        let g = make_grid(1.0, 1000, 1e-3, Spacing::Uniform).unwrap();
        assert_eq!(g.len(), 1001);
        // (1 - 0.001) / 1000 computed by hand
        for dt in g.dts() {
            assert!((dt - 0.000999).abs() < 1e-15);
        }
        assert_eq!(g.end(), 0.999);
    }

    #[test]
    fn refined_grid_puts_half_the_steps_in_last_decade() {
        let g = make_grid(1.0, 1000, 1e-3, Spacing::refined()).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.end(), 0.999);
        let split = 0.9 * 0.999;
        let tail = g.points().iter().filter(|&&t| t > split + 1e-12).count();
        assert_eq!(tail, 500);
        // ratio dt / (T - t) is roughly constant in the refined part
        let r0 = g.dt(600) / (1.0 - g.t(600));
        let r1 = g.dt(990) / (1.0 - g.t(990));
        assert!((r0 / r1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let g = make_grid(1.0, 100, 0.02, Spacing::Uniform).unwrap();
        let c = g.subsample(10).unwrap();
        assert_eq!(c.steps(), 10);
        assert_eq!(c.end(), g.end());
        assert!(g.subsample(7).is_err());
    }

    #[test]
    fn nearest_index_rounds() {
        let g = make_grid(1.0, 10, 0.1, Spacing::Uniform).unwrap();
        assert_eq!(g.nearest_index(0.0), 0);
        assert_eq!(g.nearest_index(0.46), 5);
        assert_eq!(g.nearest_index(5.0), 10);
    }
}
