//! Mutual information between the measurement history and statistics of the
//! latent: the filtration-gap estimator, its linear-diffusion and score-gap
//! forms, quadrature oracles and the plug-in sufficiency/DPI battery.

mod estimators;
mod plugin;
mod quadrature;

pub use estimators::{
    initial_information, mi_general, mi_linear, mi_score_gap, score_gap_integrands, simulate_under_prior, I0Method,
    I0Term, MIEstimate, PriorPath, ScoreGapForm,
};
pub use plugin::{
    dpi_check, plugin_mi, plugin_mi_bootstrap, quantile_edges, quantize, DpiReport, DpiRow, PluginConfig,
    MIN_SAMPLES_PER_CELL,
};
pub use quadrature::{adaptive_simpson, channel_mi, gaussian_channel_mi, mi_quadrature_oracle, QUADRATURE_TOLERANCE};
