use std::fmt;

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::selection::{SelectionConfig, Strategy};

/// One point of the sweep grid. Parameters a strategy ignores are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub strategy: Strategy,
    pub budget: usize,
    pub alpha: Option<f64>,
    pub gap_power: Option<f64>,
    pub seed: Option<u64>,
}

impl Cell {
    /// Selection config for this cell; for random cells `seed` is the base seed.
    pub fn selection_config(&self) -> SelectionConfig {
        let mut c = SelectionConfig::new(self.strategy, self.budget);
        if let Some(a) = self.alpha {
            c = c.with_alpha(a);
        }
        if let Some(p) = self.gap_power {
            c = c.with_gap_power(p);
        }
        if let Some(s) = self.seed {
            c = c.with_seed(s);
        }
        c
    }

    /// File-name-safe identifier, e.g. `coverage_saliency_K64_a0.5_p1`.
    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_K{}", self.strategy, self.budget)?;
        if let Some(a) = self.alpha {
            write!(f, "_a{a}")?;
        }
        if let Some(p) = self.gap_power {
            write!(f, "_p{p}")?;
        }
        if let Some(s) = self.seed {
            write!(f, "_s{s}")?;
        }
        Ok(())
    }
}

/// Cells in strategy, budget, alpha, gap power, seed order.
pub fn expand_grid(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &strategy in &config.strategies {
        for &budget in &config.budgets {
            let base = Cell {
                strategy,
                budget,
                alpha: None,
                gap_power: None,
                seed: None,
            };
            if strategy.uses_coverage_params() {
                for &alpha in &config.alphas {
                    for &p in &config.gap_powers {
                        cells.push(Cell {
                            alpha: Some(alpha),
                            gap_power: Some(p),
                            ..base
                        });
                    }
                }
            } else if strategy.uses_seed() {
                cells.extend(config.seeds.iter().map(|&s| Cell { seed: Some(s), ..base }));
            } else {
                cells.push(base);
            }
        }
    }
    cells
}
