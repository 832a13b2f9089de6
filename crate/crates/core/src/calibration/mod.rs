//! Confidence-quality evaluation: ECE and reliability bins, Brier, NLL,
//! risk-coverage/AURC, overconfidence, selective accuracy, temperature
//! scaling and bootstrap intervals.

mod bootstrap;
mod metrics;
mod normalize;
mod report;
mod temperature;

pub use bootstrap::{bootstrap_ci, percentile, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
pub use metrics::{
    accuracy, aurc, bin_index, brier, confidence_ranking, ece, ece_from_bins, mean_confidence, nll,
    overconfidence, reliability_bins, risk_coverage_curve, selective_accuracy, ReliabilityBin,
    RiskCoveragePoint, DEFAULT_BINS, NLL_FLOOR,
};
pub use normalize::{normalize_binary, normalize_multiclass, Normalized};
pub use report::{report, CalibrationReport, ReportOptions};
pub use temperature::{
    apply_temperature, cv_temperature, fit_temperature, fit_temperature_on_grid, CvTemperature,
    TemperatureFit, TemperatureGrid,
};

pub const DEFAULT_FOLDS: usize = 5;
