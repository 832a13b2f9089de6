//! Evaluated predictions and the line-delimited JSON prediction file.
//!
//! One object per line:
//!
//! ```text
//! {"example_id":"pope-0001","split":"adversarial","true_label":"yes","probs":{"yes":0.71,"no":0.29}}
//! ```
//!
//! An optional `"correct"` boolean is checked against the argmax on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of an input probability vector's sum from 1 before renormalizing.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// One evaluated example.
///
/// Probabilities are keyed by label; `BTreeMap` ordering doubles as the
/// lexicographic tie-break for the argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    example_id: String,
    split: String,
    probs: BTreeMap<String, f64>,
    true_label: String,
    confidence: f64,
    correct: bool,
}

enum Issue {
    Malformed(String),
    Unnormalized(f64),
    UnknownLabel(String),
}

impl Issue {
    fn at_line(self, line: usize) -> Error {
        match self {
            Issue::Malformed(reason) => Error::MalformedLine { line, reason },
            Issue::Unnormalized(sum) => Error::UnnormalizedProbs { line, sum },
            Issue::UnknownLabel(label) => Error::UnknownTrueLabel { line, label },
        }
    }

    fn detached(self) -> Error {
        match self {
            Issue::Malformed(reason) => Error::InvalidProbabilities(reason),
            Issue::Unnormalized(sum) => {
                Error::InvalidProbabilities(format!("probabilities sum to {sum}, not 1"))
            }
            Issue::UnknownLabel(label) => {
                Error::InvalidProbabilities(format!("true label {label:?} is not a candidate"))
            }
        }
    }
}

/// Label with the largest probability; ties go to the lexicographically smallest label.
pub fn argmax_label(probs: &BTreeMap<String, f64>) -> Option<(&str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for (label, &p) in probs {
        match best {
            Some((_, q)) if p <= q => {}
            _ => best = Some((label.as_str(), p)),
        }
    }
    best
}

fn normalized(mut probs: BTreeMap<String, f64>) -> std::result::Result<BTreeMap<String, f64>, Issue> {
    if probs.is_empty() {
        return Err(Issue::Malformed("empty candidate set".into()));
    }
    for (label, &p) in &probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Issue::Malformed(format!("probability {p} for {label:?} outside [0, 1]")));
        }
    }
    let sum: f64 = probs.values().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Issue::Unnormalized(sum));
    }
    // Sums within rounding noise of 1 are kept verbatim so that re-reading a
    // written record reproduces it bit for bit.
    if (sum - 1.0).abs() > probs.len() as f64 * f64::EPSILON {
        for p in probs.values_mut() {
            *p /= sum;
        }
    }
    Ok(probs)
}

impl PredictionRecord {
    fn build(
        example_id: String,
        split: String,
        probs: BTreeMap<String, f64>,
        true_label: String,
    ) -> std::result::Result<Self, Issue> {
        let probs = normalized(probs)?;
        if !probs.contains_key(&true_label) {
            return Err(Issue::UnknownLabel(true_label));
        }
        let (predicted, confidence) = argmax_label(&probs).expect("non-empty");
        let correct = predicted == true_label;
        Ok(Self {
            example_id,
            split,
            probs,
            true_label,
            confidence,
            correct,
        })
    }

    /// Validates and renormalizes `probs`, then derives confidence and correctness.
    pub fn new(
        example_id: impl Into<String>,
        split: impl Into<String>,
        probs: BTreeMap<String, f64>,
        true_label: impl Into<String>,
    ) -> Result<Self> {
        Self::build(example_id.into(), split.into(), probs, true_label.into()).map_err(Issue::detached)
    }

    /// Convenience constructor from `(label, probability)` pairs.
    pub fn from_pairs<'a>(
        example_id: impl Into<String>,
        split: impl Into<String>,
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
        true_label: impl Into<String>,
    ) -> Result<Self> {
        let probs = pairs.into_iter().map(|(l, p)| (l.to_string(), p)).collect();
        Self::new(example_id, split, probs, true_label)
    }

    /// Same example with a replacement probability vector.
    pub fn with_probs(&self, probs: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(self.example_id.clone(), self.split.clone(), probs, self.true_label.clone())
    }

    /// Replacement vector that is already normalized over the same labels.
    pub(crate) fn with_normalized_probs(&self, probs: BTreeMap<String, f64>) -> Self {
        let (predicted, confidence) = argmax_label(&probs).expect("non-empty");
        let correct = predicted == self.true_label;
        Self {
            example_id: self.example_id.clone(),
            split: self.split.clone(),
            probs,
            true_label: self.true_label.clone(),
            confidence,
            correct,
        }
    }

    pub fn example_id(&self) -> &str {
        &self.example_id
    }

    pub fn split(&self) -> &str {
        &self.split
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    pub fn true_label(&self) -> &str {
        &self.true_label
    }

    pub fn prob_of_true(&self) -> f64 {
        self.probs[&self.true_label]
    }

    pub fn predicted_label(&self) -> &str {
        argmax_label(&self.probs).expect("non-empty").0
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn correct(&self) -> bool {
        self.correct
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    example_id: String,
    split: String,
    true_label: String,
    probs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
}

/// Parses one prediction line. `line` is 1-based and only used for error context.
pub fn parse_prediction_line(text: &str, line: usize) -> Result<PredictionRecord> {
    let raw: RecordLine =
        serde_json::from_str(text).map_err(|e| Issue::Malformed(e.to_string()).at_line(line))?;
    let record = PredictionRecord::build(raw.example_id, raw.split, raw.probs, raw.true_label)
        .map_err(|issue| issue.at_line(line))?;
    if raw.correct.is_some_and(|c| c != record.correct) {
        return Err(Error::CorrectFlagMismatch { line });
    }
    Ok(record)
}

pub fn format_prediction_line(record: &PredictionRecord) -> String {
    let line = RecordLine {
        example_id: record.example_id.clone(),
        split: record.split.clone(),
        true_label: record.true_label.clone(),
        probs: record.probs.clone(),
        correct: Some(record.correct),
    };
    serde_json::to_string(&line).expect("record serializes")
}

/// Reads a prediction file; blank lines are skipped.
pub fn read_prediction_file(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_prediction_line(&line, i + 1)?);
    }
    Ok(records)
}

pub fn write_prediction_file(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        writeln!(out, "{}", format_prediction_line(record)).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_line_builds_record() {
        let r = parse_prediction_line(
            r#"{"example_id":"a","split":"random","true_label":"yes","probs":{"yes":0.7,"no":0.3}}"#,
            1,
        )
        .unwrap();
        assert_eq!(r.confidence(), 0.7);
        assert!(r.correct());
        assert_eq!(r.predicted_label(), "yes");
    }

    #[test]
    fn unnormalized_probs_rejected_with_line() {
        let err = parse_prediction_line(
            r#"{"example_id":"a","split":"s","true_label":"yes","probs":{"yes":0.7,"no":0.7}}"#,
            4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnnormalizedProbs { line: 4, .. }), "{err}");
    }

    #[test]
    fn unknown_true_label_rejected() {
        let err = parse_prediction_line(
            r#"{"example_id":"a","split":"s","true_label":"maybe","probs":{"yes":0.7,"no":0.3}}"#,
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownTrueLabel { line: 2, .. }));
    }

    #[test]
    fn malformed_json_rejected() {
        let err = parse_prediction_line("{not json", 7).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 7, .. }));
        let err = parse_prediction_line(
            r#"{"example_id":"a","split":"s","true_label":"yes","probs":{"yes":1.5,"no":-0.5}}"#,
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 3, .. }));
    }

    #[test]
    fn small_rounding_is_renormalized() {
        let r = PredictionRecord::from_pairs("a", "s", [("yes", 0.7000004), ("no", 0.3)], "no").unwrap();
        let sum: f64 = r.probs().values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(!r.correct());
    }

    #[test]
    fn stored_correct_flag_must_agree() {
        let err = parse_prediction_line(
            r#"{"example_id":"a","split":"s","true_label":"no","probs":{"yes":0.7,"no":0.3},"correct":true}"#,
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CorrectFlagMismatch { line: 5 }));
    }

    #[test]
    fn argmax_ties_go_to_smallest_label() {
        let r = PredictionRecord::from_pairs("a", "s", [("yes", 0.5), ("no", 0.5)], "no").unwrap();
        assert_eq!(r.predicted_label(), "no");
        assert!(r.correct());
        let r = PredictionRecord::from_pairs("a", "s", [("B", 0.25), ("A", 0.25), ("C", 0.25), ("D", 0.25)], "B")
            .unwrap();
        assert!(!r.correct());
    }

    #[test]
    fn line_round_trip() {
        let r = PredictionRecord::from_pairs("ex-1", "popular", [("A", 0.1), ("B", 0.6), ("C", 0.3)], "B").unwrap();
        let back = parse_prediction_line(&format_prediction_line(&r), 1).unwrap();
        assert_eq!(back, r);
    }
}
