//! Command-line front end. Exit codes: 0 success, 1 usage or configuration,
//! 2 unreadable or invalid data, 3 internal consistency failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use landmark_variability::commands::{self, ImportOptions, Outcome, ScheduleOptions, SimulateOptions};
use landmark_variability::config::{parse_space, RunConfig};
use landmark_variability::plot::PlotOptions;
use landmark_variability::synthetic::ConfidenceModel;
use landmark_variability::{Error, FusionStrategy, Result};

#[derive(Parser)]
#[command(
    name = "lmvar",
    version,
    about = "Landmark inter-rater variability and uncertainty analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a native corpus from ISBI-style rater folders or re-normalize one.
    Import(ImportArgs),
    /// Inter-rater variability metrics per (scan, landmark).
    Variability(Common),
    /// Uncertainty metrics of each strategy's prediction samples.
    Uncertainty(Common),
    /// MRE and SDR per strategy over cross-validation folds.
    Evaluate(Common),
    /// Full report with uncertainty-variability and uncertainty-error correlations.
    Correlate(Common),
    /// Generate a synthetic multi-rater corpus and prediction samples.
    Simulate(SimulateArgs),
    /// Seeded random-rater training schedule.
    Schedule(ScheduleArgs),
    /// SVG scatter plots with covariance ellipses.
    Plot(PlotArgs),
}

#[derive(Args, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Strategy sample file as NAME=PATH, or NAME to select one from the config; repeatable.
    #[arg(long = "strategy", value_name = "NAME=PATH")]
    strategies: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    bin_size: Option<usize>,
    /// `sequential` or `sorted`.
    #[arg(long)]
    bin_order: Option<String>,
    /// SDR thresholds in mm, comma separated.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Stabilizer for both anisotropy and WCVar.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Space of sample files lacking one: preset name or id:WxH@MMX,MMY.
    #[arg(long)]
    space: Option<String>,
    /// Space in which distances are measured.
    #[arg(long)]
    canonical_space: Option<String>,
    /// `silver_mean` or `rater:<id>`.
    #[arg(long)]
    ground_truth: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig {
            corpus: self.corpus.clone(),
            out: self.out.clone(),
            seed: self.seed,
            folds: self.folds,
            bin_size: self.bin_size,
            bin_order: self.bin_order.clone(),
            thresholds: self.thresholds.clone(),
            epsilon: self.epsilon,
            space: self.space.clone(),
            canonical_space: self.canonical_space.clone(),
            ground_truth: self.ground_truth.clone(),
            ..Default::default()
        };
        let mut selected = Vec::new();
        for s in &self.strategies {
            let Some((name, path)) = s.split_once('=') else {
                selected.push(s.parse::<FusionStrategy>()?);
                continue;
            };
            if flags.strategies.insert(name.to_string(), path.into()).is_some() {
                return Err(Error::InvalidParameter(format!("--strategy {name} given twice")));
            }
        }
        let mut merged = base.merge(flags);
        if !selected.is_empty() {
            let mut kept = BTreeMap::new();
            for (name, path) in std::mem::take(&mut merged.strategies) {
                if selected.contains(&name.parse::<FusionStrategy>()?) {
                    kept.insert(name, path);
                }
            }
            if kept.len() < selected.len() {
                return Err(Error::InvalidParameter(
                    "--strategy names a strategy without a sample file".into(),
                ));
            }
            merged.strategies = kept;
        }
        Ok(merged)
    }
}

#[derive(Args)]
struct ImportArgs {
    /// Directory laid out as <rater_id>/<scan_id>.txt.
    #[arg(long, conflicts_with = "native", required_unless_present = "native")]
    isbi: Option<PathBuf>,
    /// Existing native JSONL corpus.
    #[arg(long)]
    native: Option<PathBuf>,
    /// Pixel space of the ISBI files.
    #[arg(long, default_value = "isbi_1935x2400")]
    space: String,
    /// Landmark line indices to keep, renumbered in the given order.
    #[arg(long, value_delimiter = ',')]
    landmarks: Option<Vec<usize>>,
    /// Names for the kept landmarks.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    #[arg(long, default_value = "corpus.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    scans: usize,
    #[arg(long, default_value_t = 11)]
    raters: usize,
    /// `spread_coupled` or `constant:<h>`.
    #[arg(long, default_value = "spread_coupled")]
    confidence: String,
    /// MC-dropout samples per landmark.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Pixel space of the generated coordinates.
    #[arg(long)]
    space: Option<String>,
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    /// Restrict to training scans of --test-fold under this many folds.
    #[arg(long, requires = "test_fold")]
    folds: Option<usize>,
    #[arg(long, requires = "folds")]
    test_fold: Option<usize>,
    #[arg(long, default_value = "schedule.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Only plot this scan.
    #[arg(long)]
    scan: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    k_sigma: f64,
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required (flag or config)")))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).in_file(&dir))?;
    Ok(dir)
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Import(a) => commands::import(&ImportOptions {
            isbi_dir: a.isbi,
            native: a.native,
            space: parse_space(&a.space)?,
            landmarks: a.landmarks,
            landmark_names: a.names,
            out: a.out,
        }),
        Command::Variability(c) => {
            let cfg = c.resolve()?;
            commands::variability(require(&cfg.corpus, "corpus")?, &cfg.analysis()?, &out_dir(&cfg)?)
        }
        Command::Uncertainty(c) => {
            let cfg = c.resolve()?;
            let space = cfg.sample_space()?;
            commands::uncertainty(
                &cfg.strategy_paths()?,
                space.as_ref(),
                &cfg.analysis()?,
                &out_dir(&cfg)?,
            )
        }
        Command::Evaluate(c) => {
            let cfg = c.resolve()?;
            let space = cfg.sample_space()?;
            commands::evaluate(
                require(&cfg.corpus, "corpus")?,
                &cfg.strategy_paths()?,
                space.as_ref(),
                &cfg.analysis()?,
                &out_dir(&cfg)?,
            )
        }
        Command::Correlate(c) => {
            let cfg = c.resolve()?;
            let space = cfg.sample_space()?;
            commands::correlate(
                require(&cfg.corpus, "corpus")?,
                &cfg.strategy_paths()?,
                space.as_ref(),
                &cfg.analysis()?,
                &out_dir(&cfg)?,
            )
        }
        Command::Simulate(a) => {
            let mut opts = SimulateOptions::new(a.seed, a.out);
            opts.spec.n_scans = a.scans;
            opts.spec.n_raters = a.raters;
            opts.spec.confidence = parse_confidence(&a.confidence)?;
            if let Some(s) = &a.space {
                opts.spec.space = parse_space(s)?;
            }
            opts.mc_samples = a.mc_samples;
            std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::from(e).in_file(&opts.out_dir))?;
            commands::simulate(&opts)
        }
        Command::Schedule(a) => commands::schedule(&ScheduleOptions {
            corpus: a.corpus,
            seed: a.seed,
            iterations: a.iterations,
            fold: a.folds.zip(a.test_fold),
            out: a.out,
        }),
        Command::Plot(a) => {
            let cfg = a.common.resolve()?;
            let opts = PlotOptions {
                k_sigma: a.k_sigma,
                ..PlotOptions::default()
            };
            commands::plot(
                require(&cfg.corpus, "corpus")?,
                &cfg.analysis()?,
                &opts,
                a.scan.as_deref(),
                &out_dir(&cfg)?,
            )
        }
    }
}

fn parse_confidence(s: &str) -> Result<ConfidenceModel> {
    match s.trim() {
        "spread_coupled" | "spread-coupled" => Ok(ConfidenceModel::SpreadCoupled),
        other => other
            .strip_prefix("constant:")
            .and_then(|h| h.parse::<f64>().ok())
            .filter(|h| h.is_finite() && *h >= 0.0)
            .map(ConfidenceModel::Constant)
            .ok_or_else(|| {
                Error::InvalidParameter(format!("confidence {s:?}: expected spread_coupled or constant:<h>"))
            }),
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
    match run(cli.command) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.summary);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
