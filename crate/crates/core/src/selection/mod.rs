//! Visual token selection strategies.
//!
//! | strategy            | rule                                                         |
//! |---------------------|--------------------------------------------------------------|
//! | `coverage_saliency` | greedy on powered coverage gap times `a(v)^alpha`            |
//! | `saliency_only`     | top-K by vision-encoder CLS attention                        |
//! | `random`            | K tokens uniformly without replacement                       |
//! | `fastv_rank`        | top-K by an LLM-layer attention vector supplied by the caller |
//!
//! Every strategy is a pure function of the feature set and [`SelectionConfig`].

mod greedy;
mod ranking;
mod similarity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use greedy::{greedy_select_with_sim, marginal_score, saliency_weight, TIE_TOLERANCE};
pub use ranking::{attention_order, random_indices};
pub use similarity::{cosine_sim_matrix, coverage_vector, SimMatrix};

use crate::error::{Error, Result};
use crate::features::TokenFeatureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    CoverageSaliency,
    SaliencyOnly,
    Random,
    /// Ranking by LLM-layer attention, reported as `fastv_rank`.
    AttentionRank,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::CoverageSaliency,
        Strategy::SaliencyOnly,
        Strategy::Random,
        Strategy::AttentionRank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CoverageSaliency => "coverage_saliency",
            Strategy::SaliencyOnly => "saliency_only",
            Strategy::Random => "random",
            Strategy::AttentionRank => "fastv_rank",
        }
    }

    /// Whether alpha and gap power affect this strategy.
    pub fn uses_coverage_params(self) -> bool {
        self == Strategy::CoverageSaliency
    }

    pub fn uses_seed(self) -> bool {
        self == Strategy::Random
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage_saliency" => Ok(Strategy::CoverageSaliency),
            "saliency_only" | "saliency" => Ok(Strategy::SaliencyOnly),
            "random" => Ok(Strategy::Random),
            "fastv_rank" | "attention_rank" => Ok(Strategy::AttentionRank),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    pub budget: usize,
    pub alpha: f64,
    pub gap_power: f64,
    pub seed: u64,
}

impl SelectionConfig {
    /// Default coverage-saliency settings: `alpha = 1`, `p = 1`.
    pub fn new(strategy: Strategy, budget: usize) -> Self {
        Self {
            strategy,
            budget,
            alpha: 1.0,
            gap_power: 1.0,
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_gap_power(mut self, gap_power: f64) -> Self {
        self.gap_power = gap_power;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, num_tokens: usize) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::ZeroBudget);
        }
        if self.budget > num_tokens {
            return Err(Error::BudgetExceedsTokens {
                budget: self.budget,
                tokens: num_tokens,
            });
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if !self.gap_power.is_finite() || self.gap_power < 1.0 {
            return Err(Error::InvalidGapPower(self.gap_power));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Kept token indices in selection order.
    pub kept: Vec<usize>,
    /// Winning score at each step (attention for ranked strategies, 0 for random).
    pub step_scores: Vec<f64>,
    /// Coverage of every token by the final kept set.
    pub coverage_final: Vec<f64>,
}

/// Runs any strategy against a precomputed similarity matrix of `fs`.
pub fn select_with_sim(fs: &TokenFeatureSet, sim: &SimMatrix, config: &SelectionConfig) -> Result<SelectionResult> {
    if sim.size() != fs.num_tokens() {
        return Err(Error::DimensionMismatch {
            what: "similarity matrix",
            expected: fs.num_tokens(),
            actual: sim.size(),
        });
    }
    config.validate(fs.num_tokens())?;
    match config.strategy {
        Strategy::CoverageSaliency => greedy_select_with_sim(sim, fs.attention(), config),
        Strategy::SaliencyOnly | Strategy::AttentionRank => {
            ranking::top_k_by_attention(sim, fs.attention(), config.budget)
        }
        Strategy::Random => ranking::random_with_sim(sim, config.budget, config.seed),
    }
}

pub fn select(fs: &TokenFeatureSet, config: &SelectionConfig) -> Result<SelectionResult> {
    select_with_sim(fs, &cosine_sim_matrix(fs), config)
}

/// Coverage-saliency greedy selection.
pub fn greedy_select(fs: &TokenFeatureSet, config: &SelectionConfig) -> Result<SelectionResult> {
    greedy_select_with_sim(&cosine_sim_matrix(fs), fs.attention(), config)
}

/// Top-`budget` tokens by the CLS attention stored in `fs`.
pub fn saliency_topk(fs: &TokenFeatureSet, budget: usize) -> Result<SelectionResult> {
    select(fs, &SelectionConfig::new(Strategy::SaliencyOnly, budget))
}

pub fn random_select(fs: &TokenFeatureSet, budget: usize, seed: u64) -> Result<SelectionResult> {
    select(fs, &SelectionConfig::new(Strategy::Random, budget).with_seed(seed))
}

/// Top-`budget` tokens by the LLM-layer attention carried in `fs.attention()`.
///
/// Same ranking rule as [`saliency_topk`]; kept separate because the attention
/// source differs and reports label it `fastv_rank`.
pub fn attention_rank_select(fs: &TokenFeatureSet, budget: usize) -> Result<SelectionResult> {
    select(fs, &SelectionConfig::new(Strategy::AttentionRank, budget))
}
