//! Deterministic synthetic stand-in for a vision-language model.
//!
//! Each example has evidence clusters (tokens the answer depends on) and
//! distractor clusters (tokens that attract attention but carry no answer
//! signal). Cluster centers are random unit vectors; tokens are noisy copies.
//! Distractor tokens get inflated attention, so saliency-driven selection
//! keeps more of them.
//!
//! Given a kept set with evidence coverage `e` (fraction of evidence clusters
//! touched) and distractor mass `m` (fraction of kept tokens that are
//! distractors), the nominal answer is right with probability
//! `sigmoid(w * (e - 1/2))` while the model reports
//! `sigmoid(w * (e - 1/2) + g * m)`. With `g = 0` the surrogate is calibrated;
//! `g > 0` makes distractor-heavy selections overconfident.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{report, CalibrationReport, ReportOptions};
use crate::error::{Error, Result};
use crate::features::{write_feature_file, TokenFeatureSet};
use crate::records::{write_prediction_file, PredictionRecord};
use crate::rng;
use crate::selection::{
    attention_order, cosine_sim_matrix, random_indices, select_with_sim, SelectionConfig, SimMatrix, Strategy,
};

pub const SPLITS: [&str; 3] = ["random", "popular", "adversarial"];
const LABELS: [&str; 2] = ["yes", "no"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub num_tokens: usize,
    pub dim: usize,
    pub num_evidence_clusters: usize,
    pub num_distractor_clusters: usize,
    /// Standard deviation of per-coordinate token noise around the cluster center.
    pub cluster_spread: f64,
    /// Slope `w` of answer accuracy in evidence coverage.
    pub evidence_weight: f64,
    /// Extra logit `g` per unit of distractor mass in the reported confidence.
    pub overconfidence_gain: f64,
    /// Multiplier on distractor-token attention.
    pub distractor_attention_gain: f64,
    pub num_examples: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            num_tokens: 96,
            dim: 16,
            num_evidence_clusters: 6,
            num_distractor_clusters: 6,
            cluster_spread: 0.15,
            evidence_weight: 4.0,
            overconfidence_gain: 1.0,
            distractor_attention_gain: 1.5,
            num_examples: 5000,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn num_clusters(&self) -> usize {
        self.num_evidence_clusters + self.num_distractor_clusters
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_tokens", self.num_tokens),
            ("dim", self.dim),
            ("num_evidence_clusters", self.num_evidence_clusters),
            ("num_distractor_clusters", self.num_distractor_clusters),
            ("num_examples", self.num_examples),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, c)| *c == 0) {
            return Err(Error::InvalidConfig(format!("surrogate {name} must be at least 1")));
        }
        if self.num_tokens < self.num_clusters() {
            return Err(Error::InvalidConfig(format!(
                "surrogate needs at least one token per cluster ({} tokens, {} clusters)",
                self.num_tokens,
                self.num_clusters()
            )));
        }
        let positives = [
            ("cluster_spread", self.cluster_spread),
            ("evidence_weight", self.evidence_weight),
            ("distractor_attention_gain", self.distractor_attention_gain),
        ];
        for (name, value) in positives {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!("surrogate {name} must be finite and > 0, got {value}")));
            }
        }
        // Zero gain is the calibrated reference setting.
        if !(self.overconfidence_gain.is_finite() && self.overconfidence_gain >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "surrogate overconfidence_gain must be finite and >= 0, got {}",
                self.overconfidence_gain
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMetadata {
    pub example_id: String,
    pub example_index: usize,
    pub split: String,
    /// Cluster of every token; evidence clusters come first.
    pub token_cluster: Vec<usize>,
    pub cluster_is_evidence: Vec<bool>,
    pub true_label: String,
    /// Uniform draw deciding whether the nominal answer is right.
    pub correctness_draw: f64,
}

impl ExampleMetadata {
    pub fn is_distractor_token(&self, token: usize) -> bool {
        !self.cluster_is_evidence[self.token_cluster[token]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExample {
    pub features: TokenFeatureSet,
    pub metadata: ExampleMetadata,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Probability that the nominal answer is right at evidence coverage `e`.
pub fn correct_probability(evidence_coverage: f64, cfg: &SurrogateConfig) -> f64 {
    sigmoid(cfg.evidence_weight * (evidence_coverage - 0.5))
}

/// Probability the surrogate assigns to its nominal answer.
pub fn nominal_confidence(evidence_coverage: f64, distractor_mass: f64, cfg: &SurrogateConfig) -> f64 {
    sigmoid(cfg.evidence_weight * (evidence_coverage - 0.5) + cfg.overconfidence_gain * distractor_mass)
}

fn unit_vector(gen: &mut rng::ToolkitRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gen.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn example_id(index: usize) -> String {
    format!("ex{index:06}")
}

/// Generates example `index`; output depends only on `(cfg, index)`.
pub fn generate_example(cfg: &SurrogateConfig, index: usize) -> Result<SurrogateExample> {
    cfg.validate()?;
    let mut gen = rng::substream(cfg.seed, index as u64);
    let clusters = cfg.num_clusters();
    let centers: Vec<Vec<f64>> = (0..clusters).map(|_| unit_vector(&mut gen, cfg.dim)).collect();
    let cluster_is_evidence: Vec<bool> = (0..clusters).map(|c| c < cfg.num_evidence_clusters).collect();

    let mut token_cluster: Vec<usize> = (0..cfg.num_tokens).map(|v| v % clusters).collect();
    rng::shuffle(&mut gen, &mut token_cluster);

    let mut features = Vec::with_capacity(cfg.num_tokens * cfg.dim);
    for &c in &token_cluster {
        let noisy: Vec<f64> = centers[c]
            .iter()
            .map(|&x| x + cfg.cluster_spread * gen.sample::<f64, _>(StandardNormal))
            .collect();
        let norm = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
        let row = if norm > 0.0 {
            noisy.iter().map(|x| x / norm).collect::<Vec<_>>()
        } else {
            centers[c].clone()
        };
        features.extend(row.into_iter().map(|x| x as f32));
    }

    let attention: Vec<f32> = token_cluster
        .iter()
        .map(|&c| {
            let z: f64 = gen.sample(StandardNormal);
            let boost = if cluster_is_evidence[c] { 1.0 } else { cfg.distractor_attention_gain };
            ((0.5 * z).exp() * boost) as f32
        })
        .collect();

    let true_label = LABELS[usize::from(gen.random::<f64>() >= 0.5)].to_string();
    let correctness_draw = gen.random::<f64>();

    Ok(SurrogateExample {
        features: TokenFeatureSet::new(cfg.num_tokens, cfg.dim, features, attention)?,
        metadata: ExampleMetadata {
            example_id: example_id(index),
            example_index: index,
            split: SPLITS[index % SPLITS.len()].to_string(),
            token_cluster,
            cluster_is_evidence,
            true_label,
            correctness_draw,
        },
    })
}

/// Evidence coverage `e` and distractor mass `m` of a kept set.
pub fn kept_statistics(kept: &[usize], metadata: &ExampleMetadata) -> Result<(f64, f64)> {
    if kept.is_empty() {
        return Err(Error::EmptyKept);
    }
    let num_tokens = metadata.token_cluster.len();
    let mut touched = vec![false; metadata.cluster_is_evidence.len()];
    let mut distractors = 0usize;
    for &v in kept {
        if v >= num_tokens {
            return Err(Error::IndexOutOfRange {
                index: v,
                size: num_tokens,
            });
        }
        touched[metadata.token_cluster[v]] = true;
        distractors += usize::from(metadata.is_distractor_token(v));
    }
    let evidence_total = metadata.cluster_is_evidence.iter().filter(|&&e| e).count();
    let evidence_hit = touched
        .iter()
        .zip(&metadata.cluster_is_evidence)
        .filter(|(&t, &e)| t && e)
        .count();
    Ok((
        evidence_hit as f64 / evidence_total as f64,
        distractors as f64 / kept.len() as f64,
    ))
}

/// Binary yes/no prediction of the surrogate model after keeping `kept`.
pub fn surrogate_predict(kept: &[usize], metadata: &ExampleMetadata, cfg: &SurrogateConfig) -> Result<PredictionRecord> {
    let (e, m) = kept_statistics(kept, metadata)?;
    let nominal_right = metadata.correctness_draw < correct_probability(e, cfg);
    let other = if metadata.true_label == LABELS[0] { LABELS[1] } else { LABELS[0] };
    let nominal = if nominal_right { metadata.true_label.as_str() } else { other };
    let confidence = nominal_confidence(e, m, cfg);
    let alternative = if nominal == LABELS[0] { LABELS[1] } else { LABELS[0] };
    let probs = BTreeMap::from([
        (nominal.to_string(), confidence),
        (alternative.to_string(), 1.0 - confidence),
    ]);
    PredictionRecord::new(metadata.example_id.clone(), metadata.split.clone(), probs, metadata.true_label.clone())
}

/// Kept indices only; the similarity matrix is built on first use by a coverage strategy.
fn kept_tokens(fs: &TokenFeatureSet, sim: &OnceCell<SimMatrix>, config: &SelectionConfig) -> Result<Vec<usize>> {
    match config.strategy {
        Strategy::CoverageSaliency => {
            let sim = sim.get_or_init(|| cosine_sim_matrix(fs));
            Ok(select_with_sim(fs, sim, config)?.kept)
        }
        Strategy::SaliencyOnly | Strategy::AttentionRank => {
            let mut kept = attention_order(fs.attention());
            kept.truncate(config.budget);
            Ok(kept)
        }
        Strategy::Random => random_indices(fs.num_tokens(), config.budget, config.seed),
    }
}

/// Surrogate predictions of every example under every selection config.
///
/// `result[c][i]` is config `c` applied to example `i`. For the random
/// strategy the config seed is a base seed: example `i` uses
/// `derive_seed(seed, i)`. The similarity matrix is built at most once per example.
pub fn surrogate_records(cfg: &SurrogateConfig, configs: &[SelectionConfig]) -> Result<Vec<Vec<PredictionRecord>>> {
    cfg.validate()?;
    for c in configs {
        c.validate(cfg.num_tokens)?;
    }
    let per_example = (0..cfg.num_examples)
        .into_par_iter()
        .map(|i| {
            let ex = generate_example(cfg, i)?;
            let sim = OnceCell::new();
            configs
                .iter()
                .map(|c| {
                    let mut c = *c;
                    if c.strategy.uses_seed() {
                        c.seed = rng::derive_seed(c.seed, i as u64);
                    }
                    let kept = kept_tokens(&ex.features, &sim, &c)?;
                    surrogate_predict(&kept, &ex.metadata, cfg)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_config: Vec<Vec<PredictionRecord>> =
        (0..configs.len()).map(|_| Vec::with_capacity(cfg.num_examples)).collect();
    for row in per_example {
        for (c, record) in row.into_iter().enumerate() {
            by_config[c].push(record);
        }
    }
    Ok(by_config)
}

/// One calibration report per selection config over the surrogate examples.
pub fn run_surrogate_sweep(
    cfg: &SurrogateConfig,
    configs: &[SelectionConfig],
    options: &ReportOptions,
) -> Result<Vec<CalibrationReport>> {
    surrogate_records(cfg, configs)?
        .iter()
        .map(|records| report(records, options))
        .collect()
}

/// Writes `ex*.pcf` feature files, `metadata.jsonl`, and full-budget
/// predictions `predictions_full.jsonl` into `dir`.
pub fn write_surrogate_dataset(cfg: &SurrogateConfig, dir: &Path) -> Result<usize> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let examples = (0..cfg.num_examples)
        .into_par_iter()
        .map(|i| generate_example(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..cfg.num_tokens).collect();
    let meta_path = dir.join("metadata.jsonl");
    let file = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut meta = BufWriter::new(file);
    let mut predictions = Vec::with_capacity(examples.len());
    for ex in &examples {
        let path = dir.join(format!("{}.pcf", ex.metadata.example_id));
        write_feature_file(&path, &ex.features)?;
        let line = serde_json::to_string(&ex.metadata).expect("metadata serializes");
        writeln!(meta, "{line}").map_err(|e| Error::io(&meta_path, e))?;
        predictions.push(surrogate_predict(&all, &ex.metadata, cfg)?);
    }
    meta.flush().map_err(|e| Error::io(&meta_path, e))?;
    write_prediction_file(dir.join("predictions_full.jsonl"), &predictions)?;
    Ok(examples.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SurrogateConfig {
        SurrogateConfig {
            num_tokens: 24,
            dim: 8,
            num_evidence_clusters: 3,
            num_distractor_clusters: 3,
            num_examples: 10,
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_example(&small(), 3).unwrap();
        let b = generate_example(&small(), 3).unwrap();
        assert_eq!(a.features.to_bytes(), b.features.to_bytes());
        assert_eq!(a.metadata, b.metadata);
        assert_ne!(a.features, generate_example(&small(), 4).unwrap().features);
    }

    #[test]
    fn clusters_partition_tokens() {
        let ex = generate_example(&small(), 0).unwrap();
        let cfg = small();
        assert_eq!(ex.metadata.token_cluster.len(), cfg.num_tokens);
        let mut sizes = vec![0; cfg.num_clusters()];
        for &c in &ex.metadata.token_cluster {
            sizes[c] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 4));
        assert_eq!(ex.metadata.cluster_is_evidence, vec![true, true, true, false, false, false]);
    }

    #[test]
    fn kept_tokens_matches_full_selection() {
        let ex = generate_example(&small(), 2).unwrap();
        let sim = OnceCell::new();
        for strategy in Strategy::ALL {
            let c = SelectionConfig::new(strategy, 7).with_alpha(0.5).with_seed(9);
            let full = crate::selection::select(&ex.features, &c).unwrap().kept;
            assert_eq!(kept_tokens(&ex.features, &sim, &c).unwrap(), full, "{strategy}");
        }
    }

    #[test]
    fn vanishing_spread_reproduces_centers() {
        let cfg = SurrogateConfig {
            cluster_spread: 1e-12,
            ..small()
        };
        let ex = generate_example(&cfg, 1).unwrap();
        for v in 0..cfg.num_tokens {
            for u in 0..cfg.num_tokens {
                if ex.metadata.token_cluster[u] == ex.metadata.token_cluster[v] {
                    assert_eq!(ex.features.row(u), ex.features.row(v));
                }
            }
        }
    }

    #[test]
    fn distractors_draw_more_attention_on_average() {
        let cfg = SurrogateConfig::default();
        let (mut d, mut e, mut nd, mut ne) = (0.0, 0.0, 0, 0);
        for i in 0..20 {
            let ex = generate_example(&cfg, i).unwrap();
            for (v, &a) in ex.features.attention().iter().enumerate() {
                if ex.metadata.is_distractor_token(v) {
                    d += f64::from(a);
                    nd += 1;
                } else {
                    e += f64::from(a);
                    ne += 1;
                }
            }
        }
        let ratio = (d / nd as f64) / (e / ne as f64);
        assert!((ratio - cfg.distractor_attention_gain).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn full_evidence_without_gain_is_calibrated() {
        let cfg = SurrogateConfig {
            overconfidence_gain: 0.0,
            ..small()
        };
        assert_eq!(nominal_confidence(1.0, 0.0, &cfg), correct_probability(1.0, &cfg));
        assert_eq!(nominal_confidence(1.0, 0.7, &cfg), correct_probability(1.0, &cfg));
    }

    #[test]
    fn distractor_mass_raises_confidence_only() {
        let cfg = small();
        assert!(nominal_confidence(0.5, 1.0, &cfg) > nominal_confidence(0.5, 0.0, &cfg));
        assert_eq!(correct_probability(0.5, &cfg), 0.5);
    }

    #[test]
    fn prediction_from_kept_set() {
        let cfg = small();
        let ex = generate_example(&cfg, 2).unwrap();
        let all: Vec<usize> = (0..cfg.num_tokens).collect();
        let r = surrogate_predict(&all, &ex.metadata, &cfg).unwrap();
        let expected = nominal_confidence(1.0, 0.5, &cfg);
        assert!((r.confidence() - expected).abs() < 1e-12);
        assert_eq!(r.correct(), ex.metadata.correctness_draw < correct_probability(1.0, &cfg));
        assert!(matches!(surrogate_predict(&[], &ex.metadata, &cfg), Err(Error::EmptyKept)));
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SurrogateConfig {
            num_tokens: 4,
            ..small()
        };
        assert!(matches!(generate_example(&bad, 0), Err(Error::InvalidConfig(_))));
        let bad = SurrogateConfig {
            cluster_spread: 0.0,
            ..small()
        };
        assert!(bad.validate().is_err());
    }
}
