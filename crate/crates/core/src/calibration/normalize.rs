//! Restricting first-token probabilities to a candidate answer set.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::records::argmax_label;

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub probs: BTreeMap<String, f64>,
    pub confidence: f64,
}

/// Renormalizes raw candidate masses so they sum to one; confidence is the largest share.
pub fn normalize_multiclass(raw: &BTreeMap<String, f64>) -> Result<Normalized> {
    if let Some((label, &p)) = raw.iter().find(|(_, &p)| !p.is_finite() || p < 0.0) {
        return Err(Error::InvalidProbabilities(format!("raw mass {p} for {label:?}")));
    }
    let total: f64 = raw.values().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let probs: BTreeMap<String, f64> = raw.iter().map(|(l, &p)| (l.clone(), p / total)).collect();
    let confidence = argmax_label(&probs).expect("non-empty").1;
    Ok(Normalized { probs, confidence })
}

/// Yes/no special case, keyed `"yes"` and `"no"`.
pub fn normalize_binary(p_yes: f64, p_no: f64) -> Result<Normalized> {
    let raw = BTreeMap::from([("yes".to_string(), p_yes), ("no".to_string(), p_no)]);
    normalize_multiclass(&raw)
}
