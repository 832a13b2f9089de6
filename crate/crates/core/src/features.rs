//! Visual token features and the `PCF1` binary container.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "PCF1" | version u32 = 1 | V u32 | d u32 | V*d f32 row-major features | V f32 attention
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"PCF1";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Per-example token features plus one attention score per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatureSet {
    num_tokens: usize,
    dim: usize,
    features: Vec<f32>,
    attention: Vec<f32>,
}

/// Checks the raw parts of a feature set. Errors name the first offending index.
pub fn validate_feature_set(
    num_tokens: usize,
    dim: usize,
    features: &[f32],
    attention: &[f32],
) -> Result<()> {
    if num_tokens == 0 || dim == 0 {
        return Err(Error::EmptyFeatureSet {
            tokens: num_tokens,
            dim,
        });
    }
    if features.len() != num_tokens * dim {
        return Err(Error::DimensionMismatch {
            what: "features",
            expected: num_tokens * dim,
            actual: features.len(),
        });
    }
    if attention.len() != num_tokens {
        return Err(Error::DimensionMismatch {
            what: "attention",
            expected: num_tokens,
            actual: attention.len(),
        });
    }
    if let Some(index) = features.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry {
            what: "feature",
            index,
        });
    }
    for (index, &value) in attention.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry {
                what: "attention",
                index,
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeAttention { index, value });
        }
    }
    Ok(())
}

impl TokenFeatureSet {
    pub fn new(num_tokens: usize, dim: usize, features: Vec<f32>, attention: Vec<f32>) -> Result<Self> {
        validate_feature_set(num_tokens, dim, &features, &attention)?;
        Ok(Self {
            num_tokens,
            dim,
            features,
            attention,
        })
    }

    /// Builds a set from one `Vec` per token.
    pub fn from_rows(rows: &[Vec<f32>], attention: Vec<f32>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "feature row",
                expected: dim,
                actual: bad.len(),
            });
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), dim, features, attention)
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn row(&self, token: usize) -> &[f32] {
        &self.features[token * self.dim..(token + 1) * self.dim]
    }

    pub fn attention(&self) -> &[f32] {
        &self.attention
    }

    /// Same features, different attention vector.
    pub fn with_attention(&self, attention: Vec<f32>) -> Result<Self> {
        Self::new(self.num_tokens, self.dim, self.features.clone(), attention)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * (self.features.len() + self.num_tokens));
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_tokens as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for x in self.features.iter().chain(&self.attention) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedFile {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != FEATURE_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedFile {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != FEATURE_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let num_tokens = word(8) as usize;
        let dim = word(12) as usize;
        let floats = num_tokens as u64 * dim as u64 + num_tokens as u64;
        let expected = HEADER_LEN as u64 + 4 * floats;
        let actual = bytes.len() as u64;
        if actual < expected {
            return Err(Error::TruncatedFile { expected, actual });
        }
        if actual > expected {
            return Err(Error::DimensionMismatch {
                what: "feature file length",
                expected: expected as usize,
                actual: actual as usize,
            });
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
        let features: Vec<f32> = values.by_ref().take(num_tokens * dim).collect();
        let attention: Vec<f32> = values.collect();
        Self::new(num_tokens, dim, features, attention)
    }
}

pub fn write_feature_file(path: impl AsRef<Path>, fs: &TokenFeatureSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, fs.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<TokenFeatureSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    TokenFeatureSet::from_bytes(&bytes)
}
