//! Coverage-saliency greedy selection.
//!
//! Each candidate `v` is scored against the current selection `S` by
//!
//! ```text
//! score(v; S) = sum_u max(0, sim(u, v) - C(u, S))^p * a(v)^alpha
//! ```
//!
//! where `C(u, S)` is the coverage of token `u`. With `p = 1` the sum is the
//! facility-location gain of adding `v`; `alpha = 0` ignores attention
//! entirely and larger `alpha` leans on saliency.

use super::similarity::{absorb, coverage_vector, SimMatrix};
use super::{SelectionConfig, SelectionResult};
use crate::error::{Error, Result};

/// Relative score difference below which two candidates count as tied.
///
/// Mathematically equal scores (e.g. two tokens that only cover each other)
/// can differ in the last ulp depending on summation order.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Lowest-index candidate within [`TIE_TOLERANCE`] of the best score, and that best score.
fn pick(scores: &[(usize, f64)]) -> Option<(usize, f64)> {
    let top = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let floor = top - TIE_TOLERANCE * top.abs().max(1.0);
    scores.iter().find(|s| s.1 >= floor).map(|s| (s.0, top))
}

/// `a^alpha` with `0^0 = 1`.
pub fn saliency_weight(attention: f32, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        f64::from(attention).powf(alpha)
    }
}

/// Sum of powered coverage gaps that `row` would close.
#[inline]
fn gap_sum(row: &[f64], coverage: &[f64], active: &[usize], gap_power: f64) -> f64 {
    let mut total = 0.0;
    if gap_power == 1.0 {
        for &u in active {
            let gap = row[u] - coverage[u];
            if gap > 0.0 {
                total += gap;
            }
        }
    } else {
        for &u in active {
            let gap = row[u] - coverage[u];
            if gap > 0.0 {
                total += gap.powf(gap_power);
            }
        }
    }
    total
}

/// Score of adding `v` to `selected`.
pub fn marginal_score(
    v: usize,
    selected: &[usize],
    sim: &SimMatrix,
    attention: &[f32],
    alpha: f64,
    gap_power: f64,
) -> Result<f64> {
    if v >= sim.size() {
        return Err(Error::IndexOutOfRange {
            index: v,
            size: sim.size(),
        });
    }
    let coverage = coverage_vector(sim, selected)?;
    let all: Vec<usize> = (0..sim.size()).collect();
    Ok(gap_sum(sim.row(v), &coverage, &all, gap_power) * saliency_weight(attention[v], alpha))
}

/// Runs `config.budget` greedy steps over a precomputed similarity matrix.
///
/// Ties (within [`TIE_TOLERANCE`]) go to the lowest token index; the step
/// score is the best score of the step, so the sequence never increases. Tokens whose coverage has reached 1
/// can no longer contribute a gap and are dropped from the inner sum.
pub fn greedy_select_with_sim(
    sim: &SimMatrix,
    attention: &[f32],
    config: &SelectionConfig,
) -> Result<SelectionResult> {
    let n = sim.size();
    if attention.len() != n {
        return Err(Error::DimensionMismatch {
            what: "attention",
            expected: n,
            actual: attention.len(),
        });
    }
    config.validate(n)?;
    let weights: Vec<f64> = attention
        .iter()
        .map(|&a| saliency_weight(a, config.alpha))
        .collect();

    let mut coverage = vec![0.0; n];
    let mut chosen = vec![false; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut kept = Vec::with_capacity(config.budget);
    let mut step_scores = Vec::with_capacity(config.budget);
    let mut scores = Vec::with_capacity(n);

    for _ in 0..config.budget {
        scores.clear();
        scores.extend(
            (0..n)
                .filter(|&v| !chosen[v])
                .map(|v| (v, gap_sum(sim.row(v), &coverage, &active, config.gap_power) * weights[v])),
        );
        let (v, score) = pick(&scores).expect("budget <= tokens leaves a candidate");
        chosen[v] = true;
        kept.push(v);
        step_scores.push(score);
        absorb(&mut coverage, sim.row(v));
        active.retain(|&u| coverage[u] < 1.0);
    }

    Ok(SelectionResult {
        kept,
        step_scores,
        coverage_final: coverage,
    })
}
