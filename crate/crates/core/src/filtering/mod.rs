//! Posterior measures over the latent: Girsanov log-weights, the exact Bayes
//! filter for finite mixtures, the Kushner–Stratonovich integrator, a
//! particle filter for continuous latents, the Kalman–Bucy oracle and the
//! innovation process.

mod exact;
mod girsanov;
mod innovation;
mod kalman;
mod kushner;
mod particle;
mod posterior;

pub use exact::{exact_discrete_filter, filtered_drift, observation_mean, observation_table, ConditioningSpec, ExactFilter};
pub use girsanov::{girsanov_increment, girsanov_logweight};
pub use innovation::{extract_innovation, innovation_from_drift, InnovationPath};
pub use kalman::{kalman_bucy, kalman_bucy_variance, KalmanTrajectory};
pub use kushner::{kushner_filter, kushner_step, KushnerFilter, KushnerRun, KushnerStep};
pub use particle::{particle_filter, systematic_resample, LatentModel, MixtureLatent, ParticleRun, ResamplePolicy};
pub use posterior::{
    posterior_project, total_variation, ParticleCloud, PosteriorState, Projection, SimplexTrajectory,
};
