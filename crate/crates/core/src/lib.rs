//! Visual token pruning strategies and the calibration metrics used to judge them.
//!
//! * [`features`] / [`records`]: token feature sets, prediction records, file formats.
//! * [`selection`]: coverage-saliency greedy, saliency top-K, random, attention-rank.
//! * [`calibration`]: ECE, Brier, NLL, AURC, temperature scaling, bootstrap.
//! * [`surrogate`]: deterministic synthetic examples for desk-scale sweeps.
//! * [`harness`]: experiment configs, grid sweeps and CSV output.

pub mod calibration;
pub mod error;
pub mod features;
pub mod harness;
pub mod records;
pub mod rng;
pub mod selection;
pub mod surrogate;

pub use error::{Error, ErrorKind, Result};
pub use features::{read_feature_file, write_feature_file, TokenFeatureSet};
pub use records::{read_prediction_file, write_prediction_file, PredictionRecord};
pub use selection::{SelectionConfig, SelectionResult, Strategy};
