use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Manifest};
use super::grid::Cell;
use super::run::{ExperimentResult, MetricRow};
use crate::error::{Error, Result};
use crate::selection::Strategy;

pub const MASTER_COLUMNS: [&str; 14] = [
    "strategy", "K", "alpha", "p", "seed", "acc", "ece", "ece_lo", "ece_hi", "brier", "nll", "aurc", "overconf",
    "t_opt",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cell_columns(cell: &Cell) -> [String; 5] {
    [
        cell.strategy.to_string(),
        cell.budget.to_string(),
        opt(cell.alpha),
        opt(cell.gap_power),
        opt(cell.seed),
    ]
}

fn metric_columns(row: &MetricRow) -> impl Iterator<Item = String> {
    row.values().into_iter().map(|v| v.to_string())
}

struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvFile {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Self {
            writer: csv::Writer::from_writer(file),
            path,
        };
        out.row(header.iter().copied())?;
        Ok(out)
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| self.err(e))
    }

    fn err(&self, e: csv::Error) -> Error {
        Error::io(&self.path, std::io::Error::other(e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_master(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let mut out = CsvFile::create(dir.join("master.csv"), &MASTER_COLUMNS)?;
    for c in &result.cells {
        let row = MetricRow::from_report(&c.report);
        out.row(cell_columns(&c.cell).into_iter().chain(metric_columns(&row)))?;
    }
    for s in &result.seed_summaries {
        for (label, row) in [("mean", &s.mean), ("std", &s.std)] {
            let head = [s.strategy.to_string(), s.budget.to_string(), String::new(), String::new(), label.into()];
            out.row(head.into_iter().chain(metric_columns(row)))?;
        }
    }
    out.finish()
}

fn write_heatmap(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<Option<PathBuf>> {
    if !config.strategies.contains(&Strategy::CoverageSaliency) {
        return Ok(None);
    }
    let budgets: Vec<String> = config.budgets.iter().map(|k| format!("K{k}")).collect();
    let header: Vec<&str> = ["p", "alpha"].into_iter().chain(budgets.iter().map(String::as_str)).collect();
    let mut out = CsvFile::create(dir.join("heatmap_ece.csv"), &header)?;
    for &p in &config.gap_powers {
        for &alpha in &config.alphas {
            let mut row = vec![p.to_string(), alpha.to_string()];
            for &k in &config.budgets {
                let ece = result
                    .cells
                    .iter()
                    .find(|c| {
                        c.cell.strategy == Strategy::CoverageSaliency
                            && c.cell.budget == k
                            && c.cell.alpha == Some(alpha)
                            && c.cell.gap_power == Some(p)
                    })
                    .map(|c| c.report.ece);
                row.push(opt(ece));
            }
            out.row(row)?;
        }
    }
    out.finish().map(Some)
}

fn write_calibrated(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    let header = [
        "strategy",
        "K",
        "alpha",
        "p",
        "seed",
        "ece",
        "ece_cv",
        "fold_temperatures",
        "selective_coverage",
        "selective_acc",
        "selective_threshold",
    ];
    let mut out = CsvFile::create(dir.join("calibrated.csv"), &header)?;
    for c in &result.cells {
        let temps: Vec<String> = c.fold_temperatures.iter().map(f64::to_string).collect();
        let tail = [
            c.report.ece.to_string(),
            c.ece_cv.to_string(),
            temps.join(";"),
            config.metrics.selective_coverage.to_string(),
            c.selective_accuracy.to_string(),
            c.selective_threshold.to_string(),
        ];
        out.row(cell_columns(&c.cell).into_iter().chain(tail))?;
    }
    out.finish()
}

fn write_splits(result: &ExperimentResult, dir: &Path) -> Result<PathBuf> {
    let header: Vec<&str> = MASTER_COLUMNS[..5]
        .iter()
        .copied()
        .chain(["split", "n"])
        .chain(MASTER_COLUMNS[5..].iter().copied())
        .collect();
    let mut out = CsvFile::create(dir.join("splits.csv"), &header)?;
    for c in &result.cells {
        for (split, r) in &c.splits {
            let row = MetricRow::from_report(r);
            out.row(
                cell_columns(&c.cell)
                    .into_iter()
                    .chain([split.clone(), r.num_records.to_string()])
                    .chain(metric_columns(&row)),
            )?;
        }
    }
    out.finish()
}

fn write_per_cell(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let bins_dir = dir.join("bins");
    let rc_dir = dir.join("risk_coverage");
    create_dir(&bins_dir)?;
    create_dir(&rc_dir)?;
    let mut written = Vec::new();
    for c in &result.cells {
        let tag = c.cell.tag();
        let header = ["lower", "upper", "count", "mean_confidence", "empirical_accuracy"];
        let mut out = CsvFile::create(bins_dir.join(format!("{tag}.csv")), &header)?;
        for b in &c.report.bins {
            out.row([
                b.lower.to_string(),
                b.upper.to_string(),
                b.count.to_string(),
                opt(b.mean_confidence),
                opt(b.empirical_accuracy),
            ])?;
        }
        written.push(out.finish()?);

        let mut out = CsvFile::create(rc_dir.join(format!("{tag}.csv")), &["coverage", "risk"])?;
        for p in &c.risk_coverage {
            out.row([p.coverage.to_string(), p.risk.to_string()])?;
        }
        written.push(out.finish()?);

        if !c.selections.is_empty() {
            let sel_dir = dir.join("selections");
            create_dir(&sel_dir)?;
            let mut out = CsvFile::create(sel_dir.join(format!("{tag}.csv")), &["example_id", "kept"])?;
            for (id, kept) in &c.selections {
                let kept: Vec<String> = kept.iter().map(usize::to_string).collect();
                out.row([id.clone(), kept.join(" ")])?;
            }
            written.push(out.finish()?);
        }
    }
    Ok(written)
}

/// Writes the manifest and every CSV table into `dir`; returns the files written.
pub fn emit_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let manifest_path = dir.join("manifest.toml");
    let manifest = Manifest::new(config.clone()).to_toml_string()?;
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let mut written = vec![manifest_path, write_master(result, dir)?];
    written.extend(write_heatmap(result, config, dir)?);
    written.push(write_calibrated(result, config, dir)?);
    written.push(write_splits(result, dir)?);
    written.extend(write_per_cell(result, dir)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run_experiment;
    use crate::surrogate::SurrogateConfig;

    #[test]
    fn master_table_has_fixed_columns_and_blank_fields() {
        let s = SurrogateConfig {
            num_tokens: 24,
            dim: 8,
            num_evidence_clusters: 3,
            num_distractor_clusters: 3,
            num_examples: 30,
            ..Default::default()
        };
        let mut cfg = ExperimentConfig::surrogate(s, vec![6], "unused");
        cfg.metrics.resamples = 20;
        cfg.alphas = vec![0.0, 1.0];
        let result = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&result, &cfg, dir.path()).unwrap();
        assert!(files.iter().all(|f| f.exists()));

        let master = fs::read_to_string(dir.path().join("master.csv")).unwrap();
        let lines: Vec<&str> = master.lines().collect();
        assert_eq!(lines[0], MASTER_COLUMNS.join(","));
        // 2 coverage + saliency + 3 random + rank, then mean and std.
        assert_eq!(lines.len(), 1 + 7 + 2);
        assert!(lines[3].starts_with("saliency_only,6,,,,"));
        assert!(lines[4].starts_with("random,6,,,0,"));
        assert!(lines[8].starts_with("random,6,,,mean,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 14));

        let heat = fs::read_to_string(dir.path().join("heatmap_ece.csv")).unwrap();
        assert_eq!(heat.lines().next().unwrap(), "p,alpha,K6");
        assert_eq!(heat.lines().count(), 3);

        let manifest = Manifest::load(&dir.path().join("manifest.toml")).unwrap();
        assert_eq!(manifest.config, cfg);
    }
}
