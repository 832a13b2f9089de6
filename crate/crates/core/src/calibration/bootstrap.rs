//! Percentile bootstrap intervals for any record-level metric.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::records::PredictionRecord;
use crate::rng;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Linear-interpolation percentile of sorted `values` at quantile `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    }
}

/// Central `level` interval of `metric` over `resamples` bootstrap draws.
///
/// Resample `i` draws its indices from substream `i` of `seed`, so the result
/// does not depend on how resamples are scheduled across threads.
pub fn bootstrap_ci<F>(
    records: &[PredictionRecord],
    metric: F,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&[&PredictionRecord]) -> Result<f64> + Sync,
{
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    if resamples == 0 {
        return Err(Error::InvalidOption("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidOption(format!("confidence level {level} outside (0, 1)")));
    }
    let n = records.len();
    let mut values = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut gen = rng::substream(seed, i as u64);
            let sample: Vec<&PredictionRecord> = (0..n).map(|_| &records[rng::index_below(&mut gen, n)]).collect();
            metric(&sample)
        })
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&values, tail), percentile(&values, 1.0 - tail)))
}
