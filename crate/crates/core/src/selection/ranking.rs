//! Attention-ranked and random token selection.

use super::similarity::{coverage_vector, SimMatrix};
use super::SelectionResult;
use crate::error::{Error, Result};
use crate::rng;

fn check_budget(budget: usize, tokens: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if budget > tokens {
        return Err(Error::BudgetExceedsTokens { budget, tokens });
    }
    Ok(())
}

/// Token indices ordered by descending attention, ties by lowest index.
pub fn attention_order(attention: &[f32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..attention.len()).collect();
    order.sort_by(|&a, &b| attention[b].total_cmp(&attention[a]).then(a.cmp(&b)));
    order
}

/// Keeps the `budget` highest-attention tokens. Step scores are the attention values.
pub fn top_k_by_attention(sim: &SimMatrix, attention: &[f32], budget: usize) -> Result<SelectionResult> {
    check_budget(budget, attention.len())?;
    let mut kept = attention_order(attention);
    kept.truncate(budget);
    let step_scores = kept.iter().map(|&i| f64::from(attention[i])).collect();
    let coverage_final = coverage_vector(sim, &kept)?;
    Ok(SelectionResult {
        kept,
        step_scores,
        coverage_final,
    })
}

/// `budget` distinct tokens drawn uniformly without replacement.
///
/// A partial Fisher-Yates pass over the toolkit generator seeded with `seed`.
/// Random selection carries no score, so every step score is 0.
pub fn random_indices(num_tokens: usize, budget: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(budget, num_tokens)?;
    let mut gen = rng::seeded(seed);
    let mut pool: Vec<usize> = (0..num_tokens).collect();
    for i in 0..budget {
        let j = i + rng::index_below(&mut gen, num_tokens - i);
        pool.swap(i, j);
    }
    pool.truncate(budget);
    Ok(pool)
}

pub fn random_with_sim(sim: &SimMatrix, budget: usize, seed: u64) -> Result<SelectionResult> {
    let kept = random_indices(sim.size(), budget, seed)?;
    let coverage_final = coverage_vector(sim, &kept)?;
    Ok(SelectionResult {
        step_scores: vec![0.0; kept.len()],
        kept,
        coverage_final,
    })
}
