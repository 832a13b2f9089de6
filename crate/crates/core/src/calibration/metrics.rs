//! Confidence-quality metrics over a set of [`PredictionRecord`]s.
//!
//! Every function accepts `&[R]` with `R: Borrow<PredictionRecord>` so that
//! bootstrap resamples can be evaluated over borrowed records.

use std::borrow::Borrow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::records::PredictionRecord;

/// Probability floor applied before taking logs.
pub const NLL_FLOOR: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 15;

fn non_empty<R>(records: &[R]) -> Result<()> {
    if records.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

/// One equal-width confidence bin. Statistics are `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub empirical_accuracy: Option<f64>,
}

impl ReliabilityBin {
    /// Share of all records falling in this bin.
    pub fn weight(&self, total: usize) -> f64 {
        self.count as f64 / total as f64
    }

    /// `|accuracy - confidence|`, zero for an empty bin.
    pub fn gap(&self) -> f64 {
        match (self.mean_confidence, self.empirical_accuracy) {
            (Some(c), Some(a)) => (a - c).abs(),
            _ => 0.0,
        }
    }
}

fn bin_edge(i: usize, num_bins: usize) -> f64 {
    i as f64 / num_bins as f64
}

/// Bin `i` holds `[i/B, (i+1)/B)`; the top bin is closed at 1.
pub fn bin_index(confidence: f64, num_bins: usize) -> usize {
    let mut i = ((confidence * num_bins as f64).floor().max(0.0) as usize).min(num_bins - 1);
    // floor(c * B) can land one bin off near an edge; settle against the edges themselves.
    while i > 0 && confidence < bin_edge(i, num_bins) {
        i -= 1;
    }
    while i + 1 < num_bins && confidence >= bin_edge(i + 1, num_bins) {
        i += 1;
    }
    i
}

pub fn reliability_bins<R: Borrow<PredictionRecord>>(records: &[R], num_bins: usize) -> Result<Vec<ReliabilityBin>> {
    non_empty(records)?;
    if num_bins == 0 {
        return Err(Error::InvalidOption("number of bins must be at least 1".into()));
    }
    let mut count = vec![0usize; num_bins];
    let mut conf_sum = vec![0.0; num_bins];
    let mut correct = vec![0usize; num_bins];
    for r in records {
        let r = r.borrow();
        let b = bin_index(r.confidence(), num_bins);
        count[b] += 1;
        conf_sum[b] += r.confidence();
        correct[b] += usize::from(r.correct());
    }
    Ok((0..num_bins)
        .map(|b| {
            let n = count[b];
            ReliabilityBin {
                lower: bin_edge(b, num_bins),
                upper: bin_edge(b + 1, num_bins),
                count: n,
                mean_confidence: (n > 0).then(|| conf_sum[b] / n as f64),
                empirical_accuracy: (n > 0).then(|| correct[b] as f64 / n as f64),
            }
        })
        .collect())
}

/// ECE as the count-weighted mean bin gap of a reliability table.
pub fn ece_from_bins(bins: &[ReliabilityBin]) -> f64 {
    let total: usize = bins.iter().map(|b| b.count).sum();
    if total == 0 {
        return 0.0;
    }
    bins.iter().map(|b| b.weight(total) * b.gap()).sum()
}

/// Expected calibration error with `num_bins` equal-width bins.
pub fn ece<R: Borrow<PredictionRecord>>(records: &[R], num_bins: usize) -> Result<f64> {
    Ok(ece_from_bins(&reliability_bins(records, num_bins)?))
}

pub fn accuracy<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    non_empty(records)?;
    let hits = records.iter().filter(|r| (*r).borrow().correct()).count();
    Ok(hits as f64 / records.len() as f64)
}

pub fn mean_confidence<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    non_empty(records)?;
    Ok(records.iter().map(|r| r.borrow().confidence()).sum::<f64>() / records.len() as f64)
}

/// Mean squared distance between the probability vector and the one-hot truth.
pub fn brier<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    non_empty(records)?;
    let total: f64 = records
        .iter()
        .map(|r| {
            let r = r.borrow();
            r.probs()
                .iter()
                .map(|(label, &p)| {
                    let target = if label == r.true_label() { 1.0 } else { 0.0 };
                    (p - target) * (p - target)
                })
                .sum::<f64>()
        })
        .sum();
    Ok(total / records.len() as f64)
}

pub fn nll<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    non_empty(records)?;
    let total: f64 = records
        .iter()
        .map(|r| -r.borrow().prob_of_true().max(NLL_FLOOR).ln())
        .sum();
    Ok(total / records.len() as f64)
}

/// Mean confidence minus accuracy, as a fraction. Positive means overconfident.
pub fn overconfidence<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    Ok(mean_confidence(records)? - accuracy(records)?)
}

/// Record indices by descending confidence; equal confidences keep input order.
pub fn confidence_ranking<R: Borrow<PredictionRecord>>(records: &[R]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .borrow()
            .confidence()
            .total_cmp(&records[a].borrow().confidence())
    });
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskCoveragePoint {
    pub coverage: f64,
    /// Error rate among the covered records.
    pub risk: f64,
}

/// Risk at every integer coverage `i/N`, most confident records first.
pub fn risk_coverage_curve<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<Vec<RiskCoveragePoint>> {
    non_empty(records)?;
    let n = records.len();
    let mut errors = 0usize;
    Ok(confidence_ranking(records)
        .into_iter()
        .enumerate()
        .map(|(i, idx)| {
            errors += usize::from(!records[idx].borrow().correct());
            RiskCoveragePoint {
                coverage: (i + 1) as f64 / n as f64,
                risk: errors as f64 / (i + 1) as f64,
            }
        })
        .collect())
}

/// Area under the risk-coverage curve: the unweighted mean of the prefix risks.
pub fn aurc<R: Borrow<PredictionRecord>>(records: &[R]) -> Result<f64> {
    let curve = risk_coverage_curve(records)?;
    Ok(curve.iter().map(|p| p.risk).sum::<f64>() / curve.len() as f64)
}

/// Accuracy on the `ceil(coverage * N)` most confident records, and the
/// confidence of the last record kept.
pub fn selective_accuracy<R: Borrow<PredictionRecord>>(records: &[R], coverage: f64) -> Result<(f64, f64)> {
    non_empty(records)?;
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::CoverageOutOfRange(coverage));
    }
    let n = records.len();
    let target = coverage * n as f64;
    // 0.8 * 5 evaluates to 4.000000000000001; treat near-integers as exact.
    let keep = if (target - target.round()).abs() < 1e-9 {
        target.round()
    } else {
        target.ceil()
    };
    let keep = (keep as usize).clamp(1, n);
    let ranking = confidence_ranking(records);
    let kept = &ranking[..keep];
    let hits = kept.iter().filter(|&&i| records[i].borrow().correct()).count();
    let threshold = records[kept[keep - 1]].borrow().confidence();
    Ok((hits as f64 / keep as f64, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(conf: f64, correct: bool) -> PredictionRecord {
        let truth = if correct { "yes" } else { "no" };
        PredictionRecord::from_pairs("x", "s", [("yes", conf), ("no", 1.0 - conf)], truth).unwrap()
    }

    fn four_records() -> Vec<PredictionRecord> {
        vec![
            binary(0.9, true),
            binary(0.9, false),
            binary(0.6, true),
            binary(0.6, true),
        ]
    }

    #[test]
    fn perfect_confident_set_has_zero_ece() {
        let records = vec![binary(1.0, true); 5];
        assert_eq!(ece(&records, 15).unwrap(), 0.0);
    }

    #[test]
    fn four_record_ece() {
        let value = ece(&four_records(), 15).unwrap();
        assert!((value - 0.4).abs() < 1e-12, "{value}");
    }

    #[test]
    fn single_incorrect_record_ece() {
        let value = ece(&[binary(0.7, false)], 15).unwrap();
        assert!((value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn four_record_bins() {
        let bins = reliability_bins(&four_records(), 15).unwrap();
        let filled: Vec<_> = bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(filled.len(), 2);
        assert_eq!(filled[0].count, 2);
        assert!((filled[0].mean_confidence.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(filled[0].empirical_accuracy, Some(1.0));
        assert!((filled[1].mean_confidence.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(filled[1].empirical_accuracy, Some(0.5));
        let empty = bins.iter().find(|b| b.count == 0).unwrap();
        assert_eq!(empty.mean_confidence, None);
        assert_eq!(empty.empirical_accuracy, None);
        assert!(bins.iter().all(|b| b.lower < b.upper));
    }

    #[test]
    fn bin_edges_are_right_open_with_closed_top() {
        assert_eq!(bin_index(0.0, 15), 0);
        assert_eq!(bin_index(1.0, 15), 14);
        for i in 0..15 {
            assert_eq!(bin_index(i as f64 / 15.0, 15), i);
        }
        assert_eq!(bin_index(0.6, 15), 9);
        assert_eq!(bin_index(0.4, 15), 6);
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[binary(1.0, true)]).unwrap(), 0.0);
        assert!((brier(&[binary(0.8, true)]).unwrap() - 0.08).abs() < 1e-12);
        let uniform =
            PredictionRecord::from_pairs("x", "s", [("A", 0.25), ("B", 0.25), ("C", 0.25), ("D", 0.25)], "C").unwrap();
        assert!((brier(&[uniform]).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn nll_examples() {
        assert_eq!(nll(&[binary(1.0, true)]).unwrap(), 0.0);
        assert!((nll(&[binary(0.5, true)]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(nll(&[binary(1.0, false)]).unwrap(), -(1e-12f64).ln());
    }

    #[test]
    fn aurc_examples() {
        assert_eq!(aurc(&vec![binary(0.8, true); 3]).unwrap(), 0.0);
        let ranked = vec![binary(0.9, true), binary(0.8, true), binary(0.7, true), binary(0.6, false)];
        assert!((aurc(&ranked).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(aurc(&vec![binary(0.8, false); 4]).unwrap(), 1.0);
    }

    #[test]
    fn overconfidence_examples() {
        let half = vec![binary(1.0, true), binary(1.0, false)];
        assert!((overconfidence(&half).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(overconfidence(&vec![binary(1.0, true); 3]).unwrap(), 0.0);
        assert!((overconfidence(&vec![binary(0.6, true); 3]).unwrap() + 0.4).abs() < 1e-12);
    }

    #[test]
    fn selective_accuracy_examples() {
        let ranked = vec![binary(0.9, true), binary(0.8, true), binary(0.7, true), binary(0.6, false)];
        assert_eq!(selective_accuracy(&ranked, 1.0).unwrap().0, 0.75);
        let (acc, threshold) = selective_accuracy(&ranked, 0.75).unwrap();
        assert_eq!(acc, 1.0);
        assert!((threshold - 0.7).abs() < 1e-12);
        assert_eq!(selective_accuracy(&vec![binary(0.7, true); 4], 0.5).unwrap().0, 1.0);
        assert!(matches!(selective_accuracy(&ranked, 0.0), Err(Error::CoverageOutOfRange(_))));
        assert!(matches!(selective_accuracy(&ranked, 1.5), Err(Error::CoverageOutOfRange(_))));
        let five = vec![binary(0.9, true); 5];
        let (_, t) = selective_accuracy(&five, 0.8).unwrap();
        assert!((t - 0.9).abs() < 1e-12);
    }

    #[test]
    fn empty_input_errors() {
        let none: Vec<PredictionRecord> = vec![];
        assert!(matches!(ece(&none, 15), Err(Error::EmptyInput)));
        assert!(matches!(brier(&none), Err(Error::EmptyInput)));
        assert!(matches!(nll(&none), Err(Error::EmptyInput)));
        assert!(matches!(aurc(&none), Err(Error::EmptyInput)));
        assert!(matches!(overconfidence(&none), Err(Error::EmptyInput)));
        assert!(matches!(selective_accuracy(&none, 0.5), Err(Error::EmptyInput)));
    }

    #[test]
    fn risk_curve_coverage_strictly_increases() {
        let curve = risk_coverage_curve(&four_records()).unwrap();
        assert!(curve.windows(2).all(|w| w[0].coverage < w[1].coverage));
        assert_eq!(curve.last().unwrap().coverage, 1.0);
    }
}
