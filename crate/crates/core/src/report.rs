//! End-to-end analysis: inter-rater variability, per-strategy accuracy,
//! uncertainty means, and both correlation tables, plus their JSON and CSV
//! serializations.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::annotation::{CoordinateSpace, Corpus, LandmarkKey, LandmarkPoint, SampleCorpus, SampleSet};
use crate::error::{Error, Result};
use crate::evaluation::{
    error_correlation, make_folds, sdr_from_errors, variability_correlation, BinOrder, FoldSplit, MetricCorrelations,
    SdrThresholds, PARTIAL_BIN_RULE,
};
use crate::fusion::{average_annotations, fused_prediction, FusionStrategy};
use crate::metrics::{LandmarkMetrics, Metric, MetricConfig};

/// What predictions are scored against.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Mean of all raters.
    #[default]
    SilverMean,
    /// A single rater's annotation.
    Rater(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub n_folds: usize,
    pub bin_size: usize,
    pub bin_order: BinOrder,
    pub thresholds: SdrThresholds,
    pub metrics: MetricConfig,
    pub canonical_space: CoordinateSpace,
    pub ground_truth: GroundTruth,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            seed: 0,
            n_folds: 4,
            bin_size: 5,
            bin_order: BinOrder::Sequential,
            thresholds: SdrThresholds::default(),
            metrics: MetricConfig::default(),
            canonical_space: CoordinateSpace::isbi_original(),
            ground_truth: GroundTruth::SilverMean,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_folds == 0 {
            return Err(Error::InvalidParameter("folds must be at least 1".into()));
        }
        if self.bin_size == 0 {
            return Err(Error::InvalidParameter("bin size must be at least 1".into()));
        }
        self.metrics.validate()?;
        self.canonical_space.validate()
    }

    fn canonical(&self) -> Arc<CoordinateSpace> {
        Arc::new(self.canonical_space.clone())
    }
}

/// Every parameter that affects the numbers, embedded in each output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub n_folds: usize,
    pub bin_size: usize,
    pub bin_order: BinOrder,
    pub partial_bin_rule: String,
    pub epsilon_aniso: f64,
    pub epsilon_wcvar: f64,
    pub canonical_space: CoordinateSpace,
    pub thresholds_mm: Vec<f64>,
    pub ground_truth: GroundTruth,
    pub metric_aggregation: String,
    pub mre_weighting: String,
    pub prediction: String,
    pub inter_rater_wcvar: String,
}

impl Metadata {
    pub fn new(cfg: &AnalysisConfig) -> Self {
        Metadata {
            seed: cfg.seed,
            n_folds: cfg.n_folds,
            bin_size: cfg.bin_size,
            bin_order: cfg.bin_order,
            partial_bin_rule: PARTIAL_BIN_RULE.into(),
            epsilon_aniso: cfg.metrics.epsilon_aniso,
            epsilon_wcvar: cfg.metrics.epsilon_wcvar,
            canonical_space: cfg.canonical_space.clone(),
            thresholds_mm: cfg.thresholds.as_slice().to_vec(),
            ground_truth: cfg.ground_truth.clone(),
            metric_aggregation: "arithmetic mean over all (scan, landmark) pairs pooled across folds".into(),
            mre_weighting: "equal weight per (scan, landmark) pair".into(),
            prediction: "mean of sample coordinates".into(),
            inter_rater_wcvar: "equal rater weights".into(),
        }
    }
}

pub type MetricTable = BTreeMap<LandmarkKey, LandmarkMetrics>;

/// Inter-rater metrics per `(scan, landmark)`, with equal-weight WCVar.
pub fn variability_table(corpus: &Corpus, cfg: &AnalysisConfig) -> Result<MetricTable> {
    let canonical = cfg.canonical();
    corpus
        .sets()
        .iter()
        .map(|set| {
            let m = LandmarkMetrics::compute(&set.cloud_mm(&canonical), None, &cfg.metrics)?;
            Ok((set.key().clone(), m))
        })
        .collect()
}

/// Uncertainty metrics per `(scan, landmark)`, weighting WCVar by heatmap peaks when present.
pub fn uncertainty_table(samples: &SampleCorpus, cfg: &AnalysisConfig) -> Result<MetricTable> {
    let canonical = cfg.canonical();
    samples
        .iter()
        .map(|set| {
            let h = set.heatmap_maxima();
            let m = LandmarkMetrics::compute(&set.cloud_mm(&canonical), h.as_deref(), &cfg.metrics)
                .map_err(|e| Error::InvalidData(format!("{}: {e}", set.key())))?;
            Ok((set.key().clone(), m))
        })
        .collect()
}

pub fn ground_truth_points(corpus: &Corpus, gt: &GroundTruth) -> Result<BTreeMap<LandmarkKey, LandmarkPoint>> {
    corpus
        .sets()
        .iter()
        .map(|set| {
            let point = match gt {
                GroundTruth::SilverMean => average_annotations(set),
                GroundTruth::Rater(r) => set
                    .point_of(r)
                    .cloned()
                    .ok_or_else(|| Error::InvalidData(format!("{}: rater {r} missing", set.key())))?,
            };
            Ok((set.key().clone(), point))
        })
        .collect()
}

fn check_keys(corpus: &Corpus, samples: &SampleCorpus) -> Result<()> {
    let mut missing: Vec<String> = corpus
        .sets()
        .iter()
        .filter(|s| samples.get(s.key()).is_none())
        .map(|s| format!("{} (no samples)", s.key()))
        .collect();
    missing.extend(
        samples
            .keys()
            .filter(|k| corpus.get(k).is_none())
            .map(|k| format!("{k} (no annotations)")),
    );
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingKeys(missing))
    }
}

/// Radial error in mm of each fused prediction against the ground truth.
pub fn detection_errors(
    corpus: &Corpus,
    strategy: FusionStrategy,
    samples: &SampleCorpus,
    cfg: &AnalysisConfig,
) -> Result<BTreeMap<LandmarkKey, f64>> {
    check_keys(corpus, samples)?;
    let canonical = cfg.canonical();
    let truth = ground_truth_points(corpus, &cfg.ground_truth)?;
    samples
        .iter()
        .map(|set: &SampleSet| {
            let pred =
                fused_prediction(strategy, set).map_err(|e| Error::InvalidData(format!("{}: {e}", set.key())))?;
            let p = pred.canonical_mm(&canonical);
            let g = truth[set.key()].canonical_mm(&canonical);
            Ok((set.key().clone(), (p[0] - g[0]).hypot(p[1] - g[1])))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub strategy: FusionStrategy,
    pub mre_mm: f64,
    pub sdr_percent: Vec<f64>,
    /// Test-fold MRE for each fold, `None` when a fold has no landmarks.
    pub fold_mre_mm: Vec<Option<f64>>,
    pub n_landmarks: usize,
}

pub fn accuracy_row(
    strategy: FusionStrategy,
    errors: &BTreeMap<LandmarkKey, f64>,
    folds: &FoldSplit,
    cfg: &AnalysisConfig,
) -> AccuracyRow {
    let all: Vec<f64> = errors.values().copied().collect();
    let mut per_fold = vec![(0.0, 0usize); folds.n_folds];
    for (key, e) in errors {
        if let Some(f) = folds.fold_of(&key.scan_id) {
            per_fold[f].0 += e;
            per_fold[f].1 += 1;
        }
    }
    AccuracyRow {
        strategy,
        mre_mm: all.iter().sum::<f64>() / all.len() as f64,
        sdr_percent: sdr_from_errors(&all, &cfg.thresholds),
        fold_mre_mm: per_fold
            .into_iter()
            .map(|(s, n)| (n > 0).then(|| s / n as f64))
            .collect(),
        n_landmarks: all.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRow {
    pub strategy: FusionStrategy,
    pub mean: LandmarkMetrics,
    /// Uncertainty vs inter-rater variability, matching metrics, binned.
    pub variability_correlation: MetricCorrelations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub strategy: FusionStrategy,
    /// Uncertainty vs detection error, unbinned.
    pub error_correlation: MetricCorrelations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub folds: FoldSplit,
    pub inter_rater_mean: LandmarkMetrics,
    pub accuracy: Vec<AccuracyRow>,
    pub uncertainty: Vec<UncertaintyRow>,
    pub reliability: Vec<ReliabilityRow>,
}

/// Builds all three tables for the given strategies, in the order given.
pub fn build_report(
    corpus: &Corpus,
    strategies: &[(FusionStrategy, SampleCorpus)],
    cfg: &AnalysisConfig,
) -> Result<Report> {
    cfg.validate()?;
    if corpus.sets().is_empty() {
        return Err(Error::Empty("annotation corpus"));
    }
    let folds = make_folds(&corpus.scan_ids(), cfg.n_folds, cfg.seed)?;
    let variability = variability_table(corpus, cfg)?;
    let inter_rater_mean = LandmarkMetrics::mean(variability.values()).expect("non-empty corpus");
    let mut report = Report {
        metadata: Metadata::new(cfg),
        folds,
        inter_rater_mean,
        accuracy: Vec::new(),
        uncertainty: Vec::new(),
        reliability: Vec::new(),
    };
    for (strategy, samples) in strategies {
        let errors = detection_errors(corpus, *strategy, samples, cfg)?;
        let unc = uncertainty_table(samples, cfg)?;
        report
            .accuracy
            .push(accuracy_row(*strategy, &errors, &report.folds, cfg));
        report.uncertainty.push(UncertaintyRow {
            strategy: *strategy,
            mean: LandmarkMetrics::mean(unc.values()).expect("keys checked against non-empty corpus"),
            variability_correlation: variability_correlation(&unc, &variability, cfg.bin_size, cfg.bin_order)?,
        });
        report.reliability.push(ReliabilityRow {
            strategy: *strategy,
            error_correlation: error_correlation(&unc, &errors)?,
        });
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn fmt_threshold(t: f64) -> String {
    format!("sdr_{t}mm")
}

pub fn write_metric_table_csv<W: Write>(out: W, table: &MetricTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scan_id", "landmark_id", "cvar_mm", "psv_mm", "anisotropy", "wcvar_mm"])?;
    for (key, m) in table {
        w.write_record([
            key.scan_id.clone(),
            key.landmark_id.to_string(),
            m.cvar_mm.to_string(),
            m.psv_mm.to_string(),
            m.anisotropy.to_string(),
            m.wcvar_mm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Strategy × (MRE, SDR at each threshold).
pub fn write_accuracy_csv<W: Write>(out: W, rows: &[AccuracyRow], thresholds: &SdrThresholds) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["strategy".to_string(), "mre_mm".to_string()];
    header.extend(thresholds.as_slice().iter().map(|t| fmt_threshold(*t)));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.strategy.to_string(), row.mre_mm.to_string()];
        rec.extend(row.sdr_percent.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Strategy × (mean metrics, variability correlations).
pub fn write_uncertainty_csv<W: Write>(out: W, rows: &[UncertaintyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["strategy", "cvar_mm", "psv_mm", "anisotropy", "wcvar_mm"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(Metric::ALL.iter().map(|m| format!("r_{}", m.name())));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.strategy.to_string()];
        rec.extend(Metric::ALL.iter().map(|m| row.mean.get(*m).to_string()));
        rec.extend(Metric::ALL.iter().map(|m| fmt_opt(row.variability_correlation.get(*m))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Strategy × error correlations.
pub fn write_reliability_csv<W: Write>(out: W, rows: &[ReliabilityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["strategy".to_string()];
    header.extend(Metric::ALL.iter().map(|m| format!("r_{}", m.name())));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.strategy.to_string()];
        rec.extend(Metric::ALL.iter().map(|m| fmt_opt(row.error_correlation.get(*m))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes through a temporary file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}
