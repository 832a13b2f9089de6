use crate::error::{Error, Result};
use crate::features::TokenFeatureSet;

/// Dense symmetric cosine-similarity matrix over the tokens of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    size: usize,
    values: Vec<f64>,
}

impl SimMatrix {
    /// Wraps a row-major matrix. Checks shape, range and symmetry.
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::DimensionMismatch {
                what: "similarity matrix",
                expected: size * size,
                actual: values.len(),
            });
        }
        for u in 0..size {
            for v in 0..size {
                let x = values[u * size + v];
                if !(-1.0..=1.0).contains(&x) {
                    return Err(Error::InvalidConfig(format!("similarity {x} at ({u}, {v}) outside [-1, 1]")));
                }
                if (x - values[v * size + u]).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!("similarity matrix not symmetric at ({u}, {v})")));
                }
            }
        }
        Ok(Self { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.size + v]
    }

    /// Similarities of every token to `v` (the matrix is symmetric).
    pub fn row(&self, v: usize) -> &[f64] {
        &self.values[v * self.size..(v + 1) * self.size]
    }
}

/// Cosine similarity between every pair of token feature rows.
///
/// All-zero rows are similar to nothing, themselves included. Off-diagonal
/// values are clamped to [-1, 1] and the diagonal of nonzero rows is exactly 1.
pub fn cosine_sim_matrix(fs: &TokenFeatureSet) -> SimMatrix {
    let n = fs.num_tokens();
    let norms: Vec<f64> = (0..n)
        .map(|t| fs.row(t).iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
        .collect();
    let mut values = vec![0.0; n * n];
    for u in 0..n {
        if norms[u] == 0.0 {
            continue;
        }
        values[u * n + u] = 1.0;
        let ru = fs.row(u);
        for v in u + 1..n {
            if norms[v] == 0.0 {
                continue;
            }
            let dot: f64 = ru
                .iter()
                .zip(fs.row(v))
                .map(|(&a, &b)| f64::from(a) * f64::from(b))
                .sum();
            let s = (dot / (norms[u] * norms[v])).clamp(-1.0, 1.0);
            values[u * n + v] = s;
            values[v * n + u] = s;
        }
    }
    SimMatrix { size: n, values }
}

/// Coverage of each token by `selected`: the best similarity to any selected
/// token, floored at the empty-set coverage of 0.
pub fn coverage_vector(sim: &SimMatrix, selected: &[usize]) -> Result<Vec<f64>> {
    let mut coverage = vec![0.0; sim.size()];
    for &s in selected {
        if s >= sim.size() {
            return Err(Error::IndexOutOfRange {
                index: s,
                size: sim.size(),
            });
        }
        absorb(&mut coverage, sim.row(s));
    }
    Ok(coverage)
}

/// Incremental update after selecting the token whose similarity row is `row`.
pub(crate) fn absorb(coverage: &mut [f64], row: &[f64]) {
    for (c, &s) in coverage.iter_mut().zip(row) {
        if s > *c {
            *c = s;
        }
    }
}
