use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::Mixture;
use crate::sde::SamplePath;

/// Nearest rendering at the reporting time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hit {
    pub component: usize,
    pub distance: f64,
}

/// Nearest `v_k` in Euclidean distance; ties go to the lowest index.
pub fn nearest_rendering(y: &[f64], mixture: &Mixture) -> Result<Hit> {
    if y.len() != mixture.dim() {
        return Err(Error::DimensionMismatch { expected: mixture.dim(), got: y.len() });
    }
    let mut best = Hit { component: 0, distance: f64::INFINITY };
    for (k, v) in mixture.renderings().iter().enumerate() {
        let d = y.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d < best.distance {
            best = Hit { component: k, distance: d };
        }
    }
    Ok(best)
}

/// Replaces `y` by its nearest rendering. Never applied implicitly.
pub fn snap_to_nearest(y: &[f64], mixture: &Mixture) -> Result<Vec<f64>> {
    Ok(mixture.rendering(nearest_rendering(y, mixture)?.component).to_vec())
}

pub fn terminal_hitting_report(paths: &[SamplePath], mixture: &Mixture) -> Result<Vec<Hit>> {
    paths.iter().map(|p| nearest_rendering(p.terminal(), mixture)).collect()
}
