use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{DataSource, ExperimentConfig, MetricOptions};
use super::grid::{expand_grid, Cell};
use crate::calibration::{
    cv_temperature, ece, report, risk_coverage_curve, selective_accuracy, CalibrationReport, ReportOptions,
    RiskCoveragePoint,
};
use crate::error::{Error, Result};
use crate::features::{read_feature_file, TokenFeatureSet};
use crate::records::{read_prediction_file, PredictionRecord};
use crate::rng::derive_seed;
use crate::selection::{select, Strategy};
use crate::surrogate::surrogate_records;

/// The metric columns of the master table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub acc: f64,
    pub ece: f64,
    pub ece_lo: f64,
    pub ece_hi: f64,
    pub brier: f64,
    pub nll: f64,
    pub aurc: f64,
    pub overconf: f64,
    pub t_opt: f64,
}

impl MetricRow {
    pub fn from_report(r: &CalibrationReport) -> Self {
        Self {
            acc: r.accuracy,
            ece: r.ece,
            ece_lo: r.ece_ci.0,
            ece_hi: r.ece_ci.1,
            brier: r.brier,
            nll: r.nll,
            aurc: r.aurc,
            overconf: r.overconfidence,
            t_opt: r.t_opt,
        }
    }

    /// Values in column order: acc, ece, ece_lo, ece_hi, brier, nll, aurc, overconf, t_opt.
    pub fn values(&self) -> [f64; 9] {
        [
            self.acc,
            self.ece,
            self.ece_lo,
            self.ece_hi,
            self.brier,
            self.nll,
            self.aurc,
            self.overconf,
            self.t_opt,
        ]
    }

    fn from_array(a: [f64; 9]) -> Self {
        Self {
            acc: a[0],
            ece: a[1],
            ece_lo: a[2],
            ece_hi: a[3],
            brier: a[4],
            nll: a[5],
            aurc: a[6],
            overconf: a[7],
            t_opt: a[8],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub report: CalibrationReport,
    /// ECE after cross-validated temperature scaling.
    pub ece_cv: f64,
    pub fold_temperatures: Vec<f64>,
    pub selective_accuracy: f64,
    pub selective_threshold: f64,
    pub risk_coverage: Vec<RiskCoveragePoint>,
    pub splits: BTreeMap<String, CalibrationReport>,
    /// Kept indices per example, when the sweep ran selection on feature files.
    pub selections: Vec<(String, Vec<usize>)>,
}

/// Mean and sample standard deviation of random-strategy cells over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub strategy: Strategy,
    pub budget: usize,
    pub seeds: usize,
    pub mean: MetricRow,
    pub std: MetricRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    pub seed_summaries: Vec<SeedSummary>,
}

/// A calibration report for each split label present in `records`.
pub fn per_split_report(
    records: &[PredictionRecord],
    options: &ReportOptions,
) -> Result<BTreeMap<String, CalibrationReport>> {
    let mut groups: BTreeMap<&str, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.split()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(split, group)| Ok((split.to_string(), report(&group, options)?)))
        .collect()
}

/// Every metric the harness reports for one cell's records.
pub fn evaluate_cell(cell: Cell, records: &[PredictionRecord], options: &MetricOptions) -> Result<CellResult> {
    let report_options = options.report_options();
    let cv = cv_temperature(records, options.folds, options.seed)?;
    let (selective_accuracy, selective_threshold) = selective_accuracy(records, options.selective_coverage)?;
    Ok(CellResult {
        cell,
        report: report(records, &report_options)?,
        ece_cv: ece(&cv.records, options.bins)?,
        fold_temperatures: cv.fold_temperatures,
        selective_accuracy,
        selective_threshold,
        risk_coverage: risk_coverage_curve(records)?,
        splits: per_split_report(records, &report_options)?,
        selections: Vec::new(),
    })
}

fn summarize_seeds(cells: &[CellResult]) -> Vec<SeedSummary> {
    let mut groups: Vec<((Strategy, usize), Vec<MetricRow>)> = Vec::new();
    for c in cells.iter().filter(|c| c.cell.seed.is_some()) {
        let key = (c.cell.strategy, c.cell.budget);
        let row = MetricRow::from_report(&c.report);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|((strategy, budget), rows)| {
            let n = rows.len() as f64;
            let mut mean = [0.0; 9];
            for r in &rows {
                for (m, v) in mean.iter_mut().zip(r.values()) {
                    *m += v / n;
                }
            }
            let mut std = [0.0; 9];
            if rows.len() > 1 {
                for r in &rows {
                    for ((s, v), m) in std.iter_mut().zip(r.values()).zip(mean) {
                        *s += (v - m) * (v - m) / (n - 1.0);
                    }
                }
                std.iter_mut().for_each(|s| *s = s.sqrt());
            }
            SeedSummary {
                strategy,
                budget,
                seeds: rows.len(),
                mean: MetricRow::from_array(mean),
                std: MetricRow::from_array(std),
            }
        })
        .collect()
}

fn load_feature_dir(dir: &Path) -> Result<Vec<(String, TokenFeatureSet)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "pcf") {
            paths.push(path);
        }
    }
    paths.sort();
    paths
        .par_iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, read_feature_file(p)?))
        })
        .collect()
}

fn run_files(
    config: &ExperimentConfig,
    cells: &[Cell],
    predictions_dir: &Path,
    features_dir: Option<&Path>,
) -> Result<Vec<CellResult>> {
    let features = features_dir.map(load_feature_dir).transpose()?;
    cells
        .iter()
        .map(|&cell| {
            let path = predictions_dir.join(format!("{}.jsonl", cell.tag()));
            let records = read_prediction_file(&path)?;
            let mut result = evaluate_cell(cell, &records, &config.metrics)?;
            if let Some(features) = &features {
                let ids: BTreeSet<&str> = features.iter().map(|(id, _)| id.as_str()).collect();
                for r in &records {
                    if !ids.contains(r.example_id()) {
                        return Err(Error::MissingFeatures {
                            path: path.clone(),
                            example_id: r.example_id().to_string(),
                        });
                    }
                }
                let base = cell.selection_config();
                result.selections = features
                    .par_iter()
                    .enumerate()
                    .map(|(i, (id, fs))| {
                        let mut c = base;
                        if cell.strategy.uses_seed() {
                            c.seed = derive_seed(c.seed, i as u64);
                        }
                        Ok((id.clone(), select(fs, &c)?.kept))
                    })
                    .collect::<Result<_>>()?;
            }
            Ok(result)
        })
        .collect()
}

/// Runs every cell of the grid. Output is identical for identical configs
/// regardless of thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells = expand_grid(config);
    let results = match &config.data {
        DataSource::Surrogate(s) => {
            let selection: Vec<_> = cells.iter().map(Cell::selection_config).collect();
            let records = surrogate_records(s, &selection)?;
            cells
                .par_iter()
                .zip(records.par_iter())
                .map(|(&cell, recs)| evaluate_cell(cell, recs, &config.metrics))
                .collect::<Result<Vec<_>>>()?
        }
        DataSource::Files {
            predictions_dir,
            features_dir,
        } => run_files(config, &cells, predictions_dir, features_dir.as_deref())?,
    };
    Ok(ExperimentResult {
        seed_summaries: summarize_seeds(&results),
        cells: results,
    })
}
