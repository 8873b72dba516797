//! Latent scenarios, observation functions, linear-diffusion schedules and
//! the exact score model for mixture and Gaussian data.

mod observation;
mod scenario;
mod schedule;
mod score;

pub use observation::{CustomObservation, InitialLaw, ObservationModel, StepObservation};
pub use scenario::{
    Attribute, GaussianLatent, LatentScenario, Mixture, Statistic, StatisticValues, Support, COMPONENT_ATTRIBUTE,
};
pub(crate) use scenario::sample_categorical;
pub use schedule::{
    analytic_bridge_moments, bridge_drift, forward_marginal, Schedule, BRIDGE_VARIANCE_PANELS, SMALL_ALPHA_THRESHOLD,
};
pub use score::{log_sum_exp, ScoreModel};
