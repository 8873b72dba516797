use crate::error::{Error, Result};
use crate::sde::SamplePath;

/// Posterior mean and (isotropic) variance per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrajectory {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

/// Closed-form posterior variance of a static Gaussian latent observed
/// through `dY = X dt + dW`: `P_t = s0 / (1 + s0 t)`.
pub fn kalman_bucy_variance(prior_variance: f64, t: f64) -> f64 {
    prior_variance / (1.0 + prior_variance * t)
}

/// Kalman–Bucy filter for `X ~ N(prior_mean, prior_variance I)` observed
/// through `H(y, x, t) = x`. The mean follows
/// `m += P_t (dY - m dt)` with the gain taken at the left endpoint.
pub fn kalman_bucy(path: &SamplePath, prior_mean: &[f64], prior_variance: f64) -> Result<KalmanTrajectory> {
    if prior_mean.len() != path.dim() {
        return Err(Error::DimensionMismatch { expected: path.dim(), got: prior_mean.len() });
    }
    if !(prior_variance >= 0.0) {
        return Err(Error::InvalidArgument("prior variance must be >= 0".into()));
    }
    let grid = path.grid();
    let mut m = prior_mean.to_vec();
    let mut dy = vec![0.0; path.dim()];
    let mut means = Vec::with_capacity(grid.len());
    let mut variances = Vec::with_capacity(grid.len());
    means.push(m.clone());
    variances.push(prior_variance);
    for i in 0..grid.steps() {
        let p = kalman_bucy_variance(prior_variance, grid.t(i));
        let dt = grid.dt(i);
        path.increment(i, &mut dy);
        for (mj, dyj) in m.iter_mut().zip(&dy) {
            *mj += p * (dyj - *mj * dt);
        }
        means.push(m.clone());
        variances.push(kalman_bucy_variance(prior_variance, grid.t(i + 1)));
    }
    Ok(KalmanTrajectory { means, variances })
}
