use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use prunecal::calibration::{self, CalibrationReport};
use prunecal::harness::{self, DataSource, ExperimentConfig, Manifest, MetricOptions};
use prunecal::selection::{self, SelectionConfig, Strategy};
use prunecal::surrogate::{self, SurrogateConfig};
use prunecal::{read_feature_file, read_prediction_file, ErrorKind};

#[derive(Parser)]
#[command(name = "prunecal", version, about = "Visual token selection and calibration metrics")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true, env = "PRUNECAL_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select tokens from one feature file.
    Select(SelectArgs),
    /// Calibration report for one prediction file.
    Metrics(MetricsArgs),
    /// Per-split calibration table for one prediction file.
    Splits(MetricsArgs),
    /// Run a sweep from an experiment config or a previous manifest.
    Sweep(SweepArgs),
    /// Write a synthetic dataset (feature files and predictions).
    Synth(SynthArgs),
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "coverage_saliency")]
    strategy: Strategy,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gap_power: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replacement attention vector (whitespace or comma separated), e.g. LLM-layer attention.
    #[arg(long)]
    attention: Option<PathBuf>,
    /// Output CSV (`step,token,score`); stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct MetricFlags {
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    resamples: Option<usize>,
    /// Bootstrap confidence level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Coverage for selective accuracy.
    #[arg(long)]
    coverage: Option<f64>,
}

impl MetricFlags {
    fn apply(&self, m: &mut MetricOptions) {
        m.bins = self.bins.unwrap_or(m.bins);
        m.resamples = self.resamples.unwrap_or(m.resamples);
        m.level = self.level.unwrap_or(m.level);
        m.folds = self.folds.unwrap_or(m.folds);
        m.seed = self.seed.unwrap_or(m.seed);
        m.selective_coverage = self.coverage.unwrap_or(m.selective_coverage);
    }
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[command(flatten)]
    flags: MetricFlags,
    /// Also write the reliability bins as CSV.
    #[arg(long)]
    bins_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// A `manifest.toml` written by an earlier sweep.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    flags: MetricFlags,
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<Strategy>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gap_powers: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of surrogate examples.
    #[arg(long)]
    examples: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    /// Surrogate parameters as TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    examples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tokens: Option<usize>,
    /// Overconfidence gain `g`.
    #[arg(long)]
    gain: Option<f64>,
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn read_attention(path: &Path) -> Result<Vec<f32>> {
    let text = fs::read_to_string(path).map_err(|e| prunecal::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for field in line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
            let v = field.parse::<f32>().map_err(|e| prunecal::Error::MalformedLine {
                line: i + 1,
                reason: format!("{}: attention entry {field:?}: {e}", path.display()),
            })?;
            values.push(v);
        }
    }
    Ok(values)
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let mut fs = read_feature_file(&args.features)?;
    if let Some(path) = &args.attention {
        fs = fs.with_attention(read_attention(path)?)?;
    }
    let config = SelectionConfig::new(args.strategy, args.budget)
        .with_alpha(args.alpha)
        .with_gap_power(args.gap_power)
        .with_seed(args.seed);
    let result = selection::select(&fs, &config)?;
    let mut text = String::from("step,token,score\n");
    for (step, (token, score)) in result.kept.iter().zip(&result.step_scores).enumerate() {
        text.push_str(&format!("{step},{token},{score}\n"));
    }
    write_output(args.output.as_deref(), &text)
}

fn report_lines(r: &CalibrationReport) -> Vec<(&'static str, String)> {
    vec![
        ("records", r.num_records.to_string()),
        ("accuracy", r.accuracy.to_string()),
        ("mean_confidence", r.mean_confidence.to_string()),
        ("ece", r.ece.to_string()),
        ("ece_ci_low", r.ece_ci.0.to_string()),
        ("ece_ci_high", r.ece_ci.1.to_string()),
        ("brier", r.brier.to_string()),
        ("nll", r.nll.to_string()),
        ("aurc", r.aurc.to_string()),
        ("overconfidence_pct_points", (100.0 * r.overconfidence).to_string()),
        ("t_opt", r.t_opt.to_string()),
    ]
}

fn cmd_metrics(args: &MetricsArgs) -> Result<()> {
    let mut options = MetricOptions::default();
    args.flags.apply(&mut options);
    let records = read_prediction_file(&args.predictions)?;
    let report = calibration::report(&records, &options.report_options())?;
    let cv = calibration::cv_temperature(&records, options.folds, options.seed)?;
    let (sel_acc, sel_threshold) = calibration::selective_accuracy(&records, options.selective_coverage)?;
    let mut lines = report_lines(&report);
    lines.push(("ece_after_cv_temperature", calibration::ece(&cv.records, options.bins)?.to_string()));
    lines.push(("selective_coverage", options.selective_coverage.to_string()));
    lines.push(("selective_accuracy", sel_acc.to_string()));
    lines.push(("selective_threshold", sel_threshold.to_string()));
    let text: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    write_output(None, &text)?;
    if let Some(path) = &args.bins_out {
        let mut csv = String::from("lower,upper,count,mean_confidence,empirical_accuracy\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for b in &report.bins {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lower,
                b.upper,
                b.count,
                opt(b.mean_confidence),
                opt(b.empirical_accuracy)
            ));
        }
        write_output(Some(path), &csv)?;
    }
    Ok(())
}

fn cmd_splits(args: &MetricsArgs) -> Result<()> {
    let mut options = MetricOptions::default();
    args.flags.apply(&mut options);
    let records = read_prediction_file(&args.predictions)?;
    let splits = harness::per_split_report(&records, &options.report_options())?;
    let mut text = String::from("split,n,acc,ece,ece_lo,ece_hi,brier,nll,aurc,overconf,t_opt\n");
    for (split, r) in &splits {
        let values: Vec<String> = harness::MetricRow::from_report(r).values().iter().map(f64::to_string).collect();
        text.push_str(&format!("{split},{},{}\n", r.num_records, values.join(",")));
    }
    write_output(None, &text)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let mut config = match (&args.config, &args.manifest) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(path)) => Manifest::load(path)?.config,
        (None, None) => unreachable!("clap requires one of --config or --manifest"),
    };
    args.flags.apply(&mut config.metrics);
    if let Some(v) = &args.output {
        config.output_dir = v.clone();
    }
    if let Some(v) = &args.strategies {
        config.strategies = v.clone();
    }
    if let Some(v) = &args.budgets {
        config.budgets = v.clone();
    }
    if let Some(v) = &args.alphas {
        config.alphas = v.clone();
    }
    if let Some(v) = &args.gap_powers {
        config.gap_powers = v.clone();
    }
    if let Some(v) = &args.seeds {
        config.seeds = v.clone();
    }
    if let Some(n) = args.examples {
        match &mut config.data {
            DataSource::Surrogate(s) => s.num_examples = n,
            DataSource::Files { .. } => {
                return Err(prunecal::Error::InvalidConfig("--examples applies only to surrogate data".into()).into())
            }
        }
    }
    let result = harness::run_experiment(&config)?;
    let written = harness::emit_outputs(&result, &config, &config.output_dir)?;
    println!(
        "{} cells, {} files written to {}",
        result.cells.len(),
        written.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| prunecal::Error::Io {
                path: path.clone(),
                source: e,
            })?;
            toml::from_str::<SurrogateConfig>(&text)
                .map_err(|e| prunecal::Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => SurrogateConfig::default(),
    };
    cfg.num_examples = args.examples.unwrap_or(cfg.num_examples);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.num_tokens = args.tokens.unwrap_or(cfg.num_tokens);
    cfg.overconfidence_gain = args.gain.unwrap_or(cfg.overconfidence_gain);
    let n = surrogate::write_surrogate_dataset(&cfg, &args.output)?;
    println!("{n} examples written to {}", args.output.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<prunecal::Error>())
        .map(prunecal::Error::kind);
    match kind {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Internal) => 3,
        Some(ErrorKind::Data) | None => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(prunecal::Error::InvalidOption("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Splits(a) => cmd_splits(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
