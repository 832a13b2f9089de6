//! Post-hoc temperature scaling over restricted candidate probabilities.
//!
//! Scaling by `T` maps `p_c` to `p_c^(1/T) / sum_c' p_c'^(1/T)`, the same as
//! dividing candidate log-probabilities by `T` and renormalizing. `T > 1`
//! softens, `T < 1` sharpens, and the argmax never moves.

use std::collections::BTreeMap;

use serde::Serialize;

use super::metrics::{nll, NLL_FLOOR};
use crate::error::{Error, Result};
use crate::records::PredictionRecord;
use crate::rng;

/// Log-spaced temperature candidates, searched together with `T = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureGrid {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Default for TemperatureGrid {
    fn default() -> Self {
        Self {
            lower: 0.05,
            upper: 10.0,
            points: 200,
        }
    }
}

impl TemperatureGrid {
    /// Ascending candidate temperatures; `1.0` is inserted if not already on the grid.
    pub fn values(&self) -> Vec<f64> {
        let (lo, hi) = (self.lower.ln(), self.upper.ln());
        let steps = self.points.saturating_sub(1).max(1) as f64;
        let mut values: Vec<f64> = (0..self.points)
            .map(|i| (lo + (hi - lo) * i as f64 / steps).exp())
            .collect();
        if !values.contains(&1.0) {
            values.push(1.0);
            values.sort_by(f64::total_cmp);
        }
        values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureFit {
    pub t_opt: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    pub grid: TemperatureGrid,
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(t))
    }
}

/// Tempered copy of one normalized probability vector.
fn temper(probs: impl Iterator<Item = f64> + Clone, t: f64) -> Vec<f64> {
    let max_log = probs.clone().map(f64::ln).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = probs.map(|p| ((p.ln() - max_log) / t).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn tempered_map(probs: &BTreeMap<String, f64>, t: f64) -> BTreeMap<String, f64> {
    probs.keys().cloned().zip(temper(probs.values().copied(), t)).collect()
}

pub fn apply_temperature(records: &[PredictionRecord], t: f64) -> Result<Vec<PredictionRecord>> {
    check_temperature(t)?;
    if t == 1.0 {
        return Ok(records.to_vec());
    }
    Ok(records
        .iter()
        .map(|r| r.with_normalized_probs(tempered_map(r.probs(), t)))
        .collect())
}

/// NLL of `records` after scaling by `t`, without materializing records.
fn tempered_nll(records: &[&PredictionRecord], t: f64) -> f64 {
    if t == 1.0 {
        return nll(records).expect("non-empty");
    }
    let total: f64 = records
        .iter()
        .map(|r| {
            let idx = r
                .probs()
                .keys()
                .position(|l| l == r.true_label())
                .expect("true label is a candidate");
            let q = temper(r.probs().values().copied(), t)[idx];
            -q.max(NLL_FLOOR).ln()
        })
        .sum();
    total / records.len() as f64
}

fn fit_refs(records: &[&PredictionRecord], grid: TemperatureGrid) -> Result<TemperatureFit> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let nll_before = nll(records)?;
    let mut best = (1.0, nll_before);
    let mut first = true;
    for t in grid.values() {
        let value = tempered_nll(records, t);
        if first || value < best.1 {
            best = (t, value);
            first = false;
        }
    }
    Ok(TemperatureFit {
        t_opt: best.0,
        nll_before,
        nll_after: best.1,
        grid,
    })
}

/// Grid search for the NLL-minimizing temperature; ties go to the smaller `T`.
pub fn fit_temperature(records: &[PredictionRecord]) -> Result<TemperatureFit> {
    fit_temperature_on_grid(records, TemperatureGrid::default())
}

pub fn fit_temperature_on_grid(records: &[PredictionRecord], grid: TemperatureGrid) -> Result<TemperatureFit> {
    let refs: Vec<&PredictionRecord> = records.iter().collect();
    fit_refs(&refs, grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvTemperature {
    /// Every record rescaled by the temperature fit on the other folds, in input order.
    pub records: Vec<PredictionRecord>,
    pub fold_temperatures: Vec<f64>,
    /// Fold assignment of each input record.
    pub fold_of: Vec<usize>,
}

/// K-fold cross-validated temperature scaling.
///
/// Records are shuffled by `seed`, cut into contiguous folds (the first
/// `N mod folds` folds get one extra record), and each fold is rescaled with
/// the temperature fit on the remaining folds.
pub fn cv_temperature(records: &[PredictionRecord], folds: usize, seed: u64) -> Result<CvTemperature> {
    if folds < 2 {
        return Err(Error::InvalidOption(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if records.len() < folds {
        return Err(Error::TooFewRecords {
            records: records.len(),
            folds,
        });
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::seeded(seed), &mut order);

    let mut fold_of = vec![0usize; n];
    let (base, extra) = (n / folds, n % folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        for &i in &order[start..start + len] {
            fold_of[i] = f;
        }
        start += len;
    }

    let mut rescaled: Vec<Option<PredictionRecord>> = vec![None; n];
    let mut fold_temperatures = Vec::with_capacity(folds);
    for f in 0..folds {
        let train: Vec<&PredictionRecord> = order
            .iter()
            .filter(|&&i| fold_of[i] != f)
            .map(|&i| &records[i])
            .collect();
        let fit = fit_refs(&train, TemperatureGrid::default())?;
        fold_temperatures.push(fit.t_opt);
        for &i in order.iter().filter(|&&i| fold_of[i] == f) {
            let r = &records[i];
            rescaled[i] = Some(if fit.t_opt == 1.0 {
                r.clone()
            } else {
                r.with_normalized_probs(tempered_map(r.probs(), fit.t_opt))
            });
        }
    }
    Ok(CvTemperature {
        records: rescaled.into_iter().map(|r| r.expect("every record in one fold")).collect(),
        fold_temperatures,
        fold_of,
    })
}
