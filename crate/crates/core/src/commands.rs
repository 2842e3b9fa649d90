//! Batch operations behind the `lmvar` subcommands.
//!
//! Each function reads its inputs, writes its outputs atomically and
//! returns an [`Outcome`] for the caller to print.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::annotation::{
    parse_isbi_annotation_file, read_corpus, read_samples, write_corpus, write_samples, AnnotationSet, CoordinateSpace,
    Corpus, LandmarkDefinition, LandmarkKey, SampleCorpus,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::make_folds;
use crate::fusion::{training_schedule, write_schedule, FusionStrategy};
use crate::metrics::LandmarkMetrics;
use crate::plot::{plot_annotation_set, PlotOptions};
use crate::report::{
    accuracy_row, build_report, detection_errors, uncertainty_table, variability_table, write_accuracy_csv,
    write_atomic, write_json, write_metric_table_csv, write_reliability_csv, write_uncertainty_csv, AccuracyRow,
    AnalysisConfig, Metadata, MetricTable,
};
use crate::synthetic::{
    default_sample_count, generate_annotations, generate_prediction_samples, ConfidenceModel, GeneratorSpec,
};

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_corpus(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn load_samples(path: &Path, default_space: Option<&CoordinateSpace>) -> Result<SampleCorpus> {
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    let space = default_space.map(|s| Arc::new(s.clone()));
    read_samples(BufReader::new(file), space.as_ref()).map_err(|e| e.in_file(path))
}

fn load_strategies(
    strategies: &[(FusionStrategy, PathBuf)],
    default_space: Option<&CoordinateSpace>,
) -> Result<Vec<(FusionStrategy, SampleCorpus)>> {
    if strategies.is_empty() {
        return Err(Error::InvalidParameter("no strategy sample files given".into()));
    }
    strategies
        .iter()
        .map(|(s, p)| Ok((*s, load_samples(p, default_space)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ImportOptions {
    /// Directory of `<rater_id>/<scan_id>.txt` ISBI-style files.
    pub isbi_dir: Option<PathBuf>,
    /// An existing native corpus to normalize.
    pub native: Option<PathBuf>,
    pub space: CoordinateSpace,
    /// Line indices to keep from ISBI files, renumbered from 0 in the given order.
    pub landmarks: Option<Vec<usize>>,
    pub landmark_names: Option<Vec<String>>,
    pub out: PathBuf,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::from(e).in_file(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn import_isbi(dir: &Path, opts: &ImportOptions) -> Result<Corpus> {
    let space = Arc::new(opts.space.clone());
    let mut grouped: std::collections::BTreeMap<LandmarkKey, Vec<(String, crate::annotation::LandmarkPoint)>> =
        Default::default();
    for rater_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let rater = rater_dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for file in sorted_entries(&rater_dir)?.into_iter().filter(|p| p.is_file()) {
            let scan = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let bytes = std::fs::read(&file).map_err(|e| Error::from(e).in_file(&file))?;
            let points = parse_isbi_annotation_file(&bytes, &space).map_err(|e| e.in_file(&file))?;
            let selected: Vec<usize> = match &opts.landmarks {
                Some(idx) => idx.clone(),
                None => (0..points.len()).collect(),
            };
            for (new_id, &line) in selected.iter().enumerate() {
                let point = points.get(line).ok_or_else(|| {
                    Error::InvalidData(format!("has {} landmarks, index {line} requested", points.len())).in_file(&file)
                })?;
                grouped
                    .entry(LandmarkKey::new(scan.clone(), new_id as u32))
                    .or_default()
                    .push((rater.clone(), point.clone()));
            }
        }
    }
    if grouped.is_empty() {
        return Err(Error::InvalidData("no annotation files found".into()).in_file(dir));
    }
    let sets = grouped
        .into_iter()
        .map(|(k, pts)| AnnotationSet::new(k, pts))
        .collect::<Result<Vec<_>>>()?;
    let landmarks = opts
        .landmark_names
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, name)| LandmarkDefinition {
            landmark_id: i as u32,
            name: name.clone(),
        })
        .collect();
    Corpus::new(landmarks, sets)
}

pub fn import(opts: &ImportOptions) -> Result<Outcome> {
    let corpus = match (&opts.isbi_dir, &opts.native) {
        (Some(dir), None) => import_isbi(dir, opts)?,
        (None, Some(path)) => load_corpus(path)?,
        _ => return Err(Error::InvalidParameter("give exactly one of --isbi or --native".into())),
    };
    write_atomic(&opts.out, |w| write_corpus(w, &corpus))?;
    let warnings = corpus
        .out_of_bounds()
        .into_iter()
        .map(|(k, r)| format!("{k} rater {r}: annotation outside the image grid"))
        .collect();
    Ok(Outcome {
        summary: format!(
            "{} scans, {} landmarks, {} raters, {} annotation records",
            corpus.scan_ids().len(),
            corpus.n_landmarks(),
            corpus.rater_ids().len(),
            corpus.n_records()
        ),
        warnings,
        written: vec![opts.out.clone()],
    })
}

#[derive(Debug, Serialize)]
struct LandmarkRow<'a> {
    scan_id: &'a str,
    landmark_id: u32,
    #[serde(flatten)]
    metrics: &'a LandmarkMetrics,
}

fn rows(table: &MetricTable) -> Vec<LandmarkRow<'_>> {
    table
        .iter()
        .map(|(k, m)| LandmarkRow {
            scan_id: &k.scan_id,
            landmark_id: k.landmark_id,
            metrics: m,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct VariabilityDoc<'a> {
    metadata: Metadata,
    mean: LandmarkMetrics,
    landmarks: Vec<LandmarkRow<'a>>,
}

pub fn variability(corpus_path: &Path, cfg: &AnalysisConfig, out_dir: &Path) -> Result<Outcome> {
    let corpus = load_corpus(corpus_path)?;
    let table = variability_table(&corpus, cfg)?;
    let mean = LandmarkMetrics::mean(table.values()).ok_or(Error::Empty("annotation corpus"))?;
    let csv_path = out_dir.join("variability.csv");
    let json_path = out_dir.join("variability.json");
    write_atomic(&csv_path, |w| write_metric_table_csv(w, &table))?;
    write_json(
        &json_path,
        &VariabilityDoc {
            metadata: Metadata::new(cfg),
            mean,
            landmarks: rows(&table),
        },
    )?;
    Ok(Outcome {
        summary: format!(
            "{} landmarks; mean CVar {:.4} mm, PSV {:.4} mm, anisotropy {:.4}, WCVar {:.4} mm",
            table.len(),
            mean.cvar_mm,
            mean.psv_mm,
            mean.anisotropy,
            mean.wcvar_mm
        ),
        warnings: Vec::new(),
        written: vec![csv_path, json_path],
    })
}

#[derive(Debug, Serialize)]
struct StrategyUncertainty<'a> {
    strategy: FusionStrategy,
    mean: LandmarkMetrics,
    landmarks: Vec<LandmarkRow<'a>>,
}

#[derive(Debug, Serialize)]
struct UncertaintyDoc<'a> {
    metadata: Metadata,
    strategies: Vec<StrategyUncertainty<'a>>,
}

/// Per-landmark uncertainty metrics for each strategy's samples.
pub fn uncertainty(
    strategies: &[(FusionStrategy, PathBuf)],
    sample_space: Option<&CoordinateSpace>,
    cfg: &AnalysisConfig,
    out_dir: &Path,
) -> Result<Outcome> {
    cfg.validate()?;
    let loaded = load_strategies(strategies, sample_space)?;
    let tables = loaded
        .iter()
        .map(|(s, samples)| Ok((*s, uncertainty_table(samples, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut written = Vec::new();
    let mut summary = Vec::new();
    let mut doc = UncertaintyDoc {
        metadata: Metadata::new(cfg),
        strategies: Vec::new(),
    };
    for (strategy, table) in &tables {
        let path = out_dir.join(format!("uncertainty_{strategy}.csv"));
        write_atomic(&path, |w| write_metric_table_csv(w, table))?;
        written.push(path);
        let mean = LandmarkMetrics::mean(table.values()).ok_or(Error::Empty("sample file"))?;
        summary.push(format!(
            "{strategy}: CVar {:.4} mm, PSV {:.4} mm, anisotropy {:.4}, WCVar {:.4} mm",
            mean.cvar_mm, mean.psv_mm, mean.anisotropy, mean.wcvar_mm
        ));
        doc.strategies.push(StrategyUncertainty {
            strategy: *strategy,
            mean,
            landmarks: rows(table),
        });
    }
    let json_path = out_dir.join("uncertainty.json");
    write_json(&json_path, &doc)?;
    written.push(json_path);
    Ok(Outcome {
        summary: summary.join("\n"),
        warnings: Vec::new(),
        written,
    })
}

#[derive(Debug, Serialize)]
struct EvaluationDoc {
    metadata: Metadata,
    folds: crate::evaluation::FoldSplit,
    accuracy: Vec<AccuracyRow>,
}

/// MRE and SDR per strategy.
pub fn evaluate(
    corpus_path: &Path,
    strategies: &[(FusionStrategy, PathBuf)],
    sample_space: Option<&CoordinateSpace>,
    cfg: &AnalysisConfig,
    out_dir: &Path,
) -> Result<Outcome> {
    cfg.validate()?;
    let corpus = load_corpus(corpus_path)?;
    let loaded = load_strategies(strategies, sample_space)?;
    let folds = make_folds(&corpus.scan_ids(), cfg.n_folds, cfg.seed)?;
    let accuracy = loaded
        .iter()
        .map(|(s, samples)| {
            Ok(accuracy_row(
                *s,
                &detection_errors(&corpus, *s, samples, cfg)?,
                &folds,
                cfg,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let csv_path = out_dir.join("table1_accuracy.csv");
    let json_path = out_dir.join("evaluation.json");
    write_atomic(&csv_path, |w| write_accuracy_csv(w, &accuracy, &cfg.thresholds))?;
    let summary = accuracy
        .iter()
        .map(|r| format!("{}: MRE {:.4} mm, SDR {:?} %", r.strategy, r.mre_mm, r.sdr_percent))
        .collect::<Vec<_>>()
        .join("\n");
    write_json(
        &json_path,
        &EvaluationDoc {
            metadata: Metadata::new(cfg),
            folds,
            accuracy,
        },
    )?;
    Ok(Outcome {
        summary,
        warnings: Vec::new(),
        written: vec![csv_path, json_path],
    })
}

/// Full report: accuracy, uncertainty means with variability correlations,
/// and error correlations.
pub fn correlate(
    corpus_path: &Path,
    strategies: &[(FusionStrategy, PathBuf)],
    sample_space: Option<&CoordinateSpace>,
    cfg: &AnalysisConfig,
    out_dir: &Path,
) -> Result<Outcome> {
    let corpus = load_corpus(corpus_path)?;
    let loaded = load_strategies(strategies, sample_space)?;
    let report = build_report(&corpus, &loaded, cfg)?;
    let paths = [
        out_dir.join("report.json"),
        out_dir.join("table1_accuracy.csv"),
        out_dir.join("table2_uncertainty.csv"),
        out_dir.join("table3_reliability.csv"),
    ];
    write_json(&paths[0], &report)?;
    write_atomic(&paths[1], |w| write_accuracy_csv(w, &report.accuracy, &cfg.thresholds))?;
    write_atomic(&paths[2], |w| write_uncertainty_csv(w, &report.uncertainty))?;
    write_atomic(&paths[3], |w| write_reliability_csv(w, &report.reliability))?;
    let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.3}"));
    let summary = report
        .uncertainty
        .iter()
        .zip(&report.reliability)
        .map(|(u, r)| {
            format!(
                "{}: r(unc, var) cvar={} psv={} aniso={} wcvar={}; r(unc, err) cvar={} psv={} aniso={} wcvar={}",
                u.strategy,
                fmt(u.variability_correlation.cvar),
                fmt(u.variability_correlation.psv),
                fmt(u.variability_correlation.anisotropy),
                fmt(u.variability_correlation.wcvar),
                fmt(r.error_correlation.cvar),
                fmt(r.error_correlation.psv),
                fmt(r.error_correlation.anisotropy),
                fmt(r.error_correlation.wcvar),
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        summary,
        warnings: Vec::new(),
        written: paths.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub spec: GeneratorSpec,
    /// MC-dropout samples per landmark; ensembles always use one sample per rater.
    pub mc_samples: Option<usize>,
    pub out_dir: PathBuf,
}

impl SimulateOptions {
    pub fn new(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        SimulateOptions {
            spec: GeneratorSpec::cephalometric(seed),
            mc_samples: None,
            out_dir: out_dir.into(),
        }
    }
}

/// Writes a synthetic corpus, one sample file per strategy, the generator
/// spec, and a `run.toml` pointing at them.
pub fn simulate(opts: &SimulateOptions) -> Result<Outcome> {
    let spec = &opts.spec;
    let corpus = generate_annotations(spec)?;
    let dir = &opts.out_dir;
    let corpus_path = dir.join("corpus.jsonl");
    write_atomic(&corpus_path, |w| write_corpus(w, &corpus))?;
    let mut written = vec![corpus_path];
    let mut run = RunConfig {
        corpus: Some("corpus.jsonl".into()),
        seed: Some(spec.seed),
        ..Default::default()
    };
    for strategy in FusionStrategy::ALL {
        let t = match (strategy, opts.mc_samples) {
            (FusionStrategy::DeepEnsembles, _) | (_, None) => default_sample_count(spec, strategy),
            (_, Some(t)) => t,
        };
        let samples = generate_prediction_samples(spec, strategy, t)?;
        let name = format!("samples_{strategy}.jsonl");
        let path = dir.join(&name);
        write_atomic(&path, |w| write_samples(w, &samples))?;
        written.push(path);
        run.strategies.insert(strategy.to_string(), name.into());
    }
    let spec_path = dir.join("generator.json");
    write_json(&spec_path, spec)?;
    let run_path = dir.join("run.toml");
    let run_text = run.to_toml_string()?;
    write_atomic(&run_path, |w| Ok(w.write_all(run_text.as_bytes())?))?;
    written.extend([spec_path, run_path]);
    let confidence = match spec.confidence {
        ConfidenceModel::Constant(h) => format!("constant {h}"),
        ConfidenceModel::SpreadCoupled => "spread-coupled".into(),
    };
    Ok(Outcome {
        summary: format!(
            "simulated {} scans x {} landmarks x {} raters ({confidence} confidence)",
            spec.n_scans,
            spec.landmarks.len(),
            spec.n_raters
        ),
        warnings: Vec::new(),
        written,
    })
}

#[derive(Debug, Clone)]
pub struct ScheduleOptions {
    pub corpus: PathBuf,
    pub seed: u64,
    pub iterations: usize,
    /// `(n_folds, test_fold)`: restrict to that fold's training scans.
    pub fold: Option<(usize, usize)>,
    pub out: PathBuf,
}

pub fn schedule(opts: &ScheduleOptions) -> Result<Outcome> {
    let corpus = load_corpus(&opts.corpus)?;
    let scans = match opts.fold {
        Some((n, k)) => {
            let split = make_folds(&corpus.scan_ids(), n, opts.seed)?;
            if k >= n {
                return Err(Error::InvalidParameter(format!(
                    "test fold {k} out of range for {n} folds"
                )));
            }
            Some(split.train_scans(k))
        }
        None => None,
    };
    let entries = training_schedule(&corpus, opts.seed, opts.iterations, scans.as_deref())?;
    write_atomic(&opts.out, |w| write_schedule(w, &entries))?;
    Ok(Outcome {
        summary: format!("{} schedule entries over {} iterations", entries.len(), opts.iterations),
        warnings: Vec::new(),
        written: vec![opts.out.clone()],
    })
}

pub fn plot(
    corpus_path: &Path,
    cfg: &AnalysisConfig,
    opts: &PlotOptions,
    scan: Option<&str>,
    out_dir: &Path,
) -> Result<Outcome> {
    let corpus = load_corpus(corpus_path)?;
    let canonical = Arc::new(cfg.canonical_space.clone());
    let mut outcome = Outcome::default();
    for set in corpus.sets().iter().filter(|s| scan.is_none_or(|id| s.scan_id() == id)) {
        let plot = plot_annotation_set(set, &canonical, opts)?;
        let path = out_dir.join(format!("{}_landmark{}.svg", set.scan_id(), set.landmark_id()));
        write_atomic(&path, |w| Ok(w.write_all(plot.svg.as_bytes())?))?;
        outcome.warnings.extend(plot.warning);
        outcome.written.push(path);
    }
    if outcome.written.is_empty() {
        return Err(Error::InvalidData(match scan {
            Some(s) => format!("scan {s} not in corpus"),
            None => "corpus is empty".into(),
        }));
    }
    outcome.summary = format!("{} plots written", outcome.written.len());
    Ok(outcome)
}
