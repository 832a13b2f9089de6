use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use super::metrics::{self, ReliabilityBin, DEFAULT_BINS};
use super::temperature::fit_temperature;
use crate::error::Result;
use crate::records::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportOptions {
    pub bins: usize,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub num_records: usize,
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub ece: f64,
    pub brier: f64,
    pub nll: f64,
    pub aurc: f64,
    /// Mean confidence minus accuracy, as a fraction.
    pub overconfidence: f64,
    pub t_opt: f64,
    pub bins: Vec<ReliabilityBin>,
    pub ece_ci: (f64, f64),
}

/// Every calibration metric for one record set, with a bootstrap interval on ECE.
pub fn report(records: &[PredictionRecord], options: &ReportOptions) -> Result<CalibrationReport> {
    let bins = metrics::reliability_bins(records, options.bins)?;
    let ece = metrics::ece_from_bins(&bins);
    let bins_for_ci = options.bins;
    let ece_ci = bootstrap_ci(
        records,
        |sample| metrics::ece(sample, bins_for_ci),
        options.resamples,
        options.level,
        options.seed,
    )?;
    Ok(CalibrationReport {
        num_records: records.len(),
        accuracy: metrics::accuracy(records)?,
        mean_confidence: metrics::mean_confidence(records)?,
        ece,
        brier: metrics::brier(records)?,
        nll: metrics::nll(records)?,
        aurc: metrics::aurc(records)?,
        overconfidence: metrics::overconfidence(records)?,
        t_opt: fit_temperature(records)?.t_opt,
        bins,
        ece_ci,
    })
}
