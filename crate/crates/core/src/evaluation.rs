//! Detection accuracy (MRE, SDR), cross-validation folds, and Pearson
//! correlation analyses with landmark binning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{LandmarkKey, LandmarkPoint};
use crate::error::{Error, Result};
use crate::metrics::{LandmarkMetrics, Metric};

/// Strictly ascending success radii in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SdrThresholds(Vec<f64>);

impl Default for SdrThresholds {
    fn default() -> Self {
        SdrThresholds(vec![2.0, 2.5, 3.0, 4.0])
    }
}

impl SdrThresholds {
    pub fn new(thresholds_mm: Vec<f64>) -> Result<Self> {
        if thresholds_mm.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidParameter("SDR thresholds must be positive".into()));
        }
        if thresholds_mm.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "SDR thresholds must be strictly ascending".into(),
            ));
        }
        Ok(SdrThresholds(thresholds_mm))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Euclidean distances in mm between paired points.
pub fn radial_errors(predictions: &[LandmarkPoint], ground_truth: &[LandmarkPoint]) -> Result<Vec<f64>> {
    if predictions.len() != ground_truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: ground_truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    Ok(predictions
        .iter()
        .zip(ground_truth)
        .map(|(p, g)| {
            let (px, py) = p.to_mm();
            let (gx, gy) = g.to_mm();
            (px - gx).hypot(py - gy)
        })
        .collect())
}

pub fn mre(predictions: &[LandmarkPoint], ground_truth: &[LandmarkPoint]) -> Result<f64> {
    let errors = radial_errors(predictions, ground_truth)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

pub fn sdr(
    predictions: &[LandmarkPoint],
    ground_truth: &[LandmarkPoint],
    thresholds: &SdrThresholds,
) -> Result<Vec<f64>> {
    Ok(sdr_from_errors(&radial_errors(predictions, ground_truth)?, thresholds))
}

/// Percentage of errors `≤ t` for each threshold `t`.
pub fn sdr_from_errors(errors_mm: &[f64], thresholds: &SdrThresholds) -> Vec<f64> {
    let n = errors_mm.len() as f64;
    thresholds
        .as_slice()
        .iter()
        .map(|t| 100.0 * errors_mm.iter().filter(|e| **e <= *t).count() as f64 / n)
        .collect()
}

/// Assignment of scans to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub n_folds: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldSplit {
    pub fn fold_of(&self, scan_id: &str) -> Option<usize> {
        self.assignments.get(scan_id).copied()
    }

    pub fn test_scans(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn train_scans(&self, fold: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, f)| **f != fold)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for f in self.assignments.values() {
            sizes[*f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle of the (sorted, de-duplicated) scans, then round-robin assignment.
pub fn make_folds(scan_ids: &[String], n_folds: usize, seed: u64) -> Result<FoldSplit> {
    let mut scans: Vec<String> = scan_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if n_folds == 0 || n_folds > scans.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot split {} scans into {n_folds} folds",
            scans.len()
        )));
    }
    scans.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignments = scans.into_iter().enumerate().map(|(i, s)| (s, i % n_folds)).collect();
    Ok(FoldSplit {
        n_folds,
        seed,
        assignments,
    })
}

/// Finite `(x, y)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    pairs: Vec<(f64, f64)>,
}

impl PairedSeries {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidData("non-finite value in paired series".into()));
        }
        Ok(PairedSeries { pairs })
    }

    pub fn from_columns(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Self::new(x.iter().copied().zip(y.iter().copied()).collect())
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Product-moment correlation coefficient.
pub fn pearson(series: &PairedSeries) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two pairs"));
    }
    let nf = n as f64;
    let mx = series.pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = series.pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &series.pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// How items are grouped before binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinOrder {
    /// Consecutive items in `(scan_id, landmark_id)` order.
    #[default]
    Sequential,
    /// Items sorted ascending by the reference (`y`) value first.
    SortedByReference,
}

impl fmt::Display for BinOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOrder::Sequential => "sequential",
            BinOrder::SortedByReference => "sorted_by_reference",
        })
    }
}

impl FromStr for BinOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "sequential" => Ok(BinOrder::Sequential),
            "sorted_by_reference" | "sorted" => Ok(BinOrder::SortedByReference),
            other => Err(Error::InvalidParameter(format!("unknown bin order {other:?}"))),
        }
    }
}

/// Rule for the trailing partial bin, recorded in report metadata.
pub const PARTIAL_BIN_RULE: &str = "trailing partial bin kept if it holds at least half of bin_size items";

/// Groups items into bins of `bin_size` and emits each bin's `(mean x, mean y)`.
pub fn binned_series(x: &[f64], y: &[f64], bin_size: usize, order: BinOrder) -> Result<PairedSeries> {
    if bin_size == 0 {
        return Err(Error::InvalidParameter("bin_size must be at least 1".into()));
    }
    let mut items = PairedSeries::from_columns(x, y)?.pairs;
    if order == BinOrder::SortedByReference {
        items.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    let pairs = items
        .chunks(bin_size)
        .filter(|chunk| 2 * chunk.len() >= bin_size)
        .map(|chunk| {
            let n = chunk.len() as f64;
            (
                chunk.iter().map(|p| p.0).sum::<f64>() / n,
                chunk.iter().map(|p| p.1).sum::<f64>() / n,
            )
        })
        .collect();
    Ok(PairedSeries { pairs })
}

/// One coefficient per metric; `None` where the correlation is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricCorrelations {
    pub cvar: Option<f64>,
    pub psv: Option<f64>,
    pub anisotropy: Option<f64>,
    pub wcvar: Option<f64>,
}

impl MetricCorrelations {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Cvar => self.cvar,
            Metric::Psv => self.psv,
            Metric::Anisotropy => self.anisotropy,
            Metric::Wcvar => self.wcvar,
        }
    }

    fn set(&mut self, metric: Metric, value: Option<f64>) {
        let slot = match metric {
            Metric::Cvar => &mut self.cvar,
            Metric::Psv => &mut self.psv,
            Metric::Anisotropy => &mut self.anisotropy,
            Metric::Wcvar => &mut self.wcvar,
        };
        *slot = value;
    }
}

fn check_alignment<A, B>(left: &BTreeMap<LandmarkKey, A>, right: &BTreeMap<LandmarkKey, B>) -> Result<()> {
    let missing: Vec<String> = left
        .keys()
        .filter(|k| !right.contains_key(*k))
        .chain(right.keys().filter(|k| !left.contains_key(*k)))
        .map(ToString::to_string)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingKeys(missing))
    }
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedCorrelation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Uncertainty vs inter-rater variability, each metric against its own
/// counterpart, over binned `(scan, landmark)` items.
pub fn variability_correlation(
    uncertainty: &BTreeMap<LandmarkKey, LandmarkMetrics>,
    variability: &BTreeMap<LandmarkKey, LandmarkMetrics>,
    bin_size: usize,
    order: BinOrder,
) -> Result<MetricCorrelations> {
    check_alignment(uncertainty, variability)?;
    let mut out = MetricCorrelations::default();
    for metric in Metric::ALL {
        let x: Vec<f64> = uncertainty.values().map(|m| m.get(metric)).collect();
        let y: Vec<f64> = variability.values().map(|m| m.get(metric)).collect();
        out.set(metric, defined(pearson(&binned_series(&x, &y, bin_size, order)?))?);
    }
    Ok(out)
}

/// Uncertainty vs detection error, unbinned over all `(scan, landmark)` items.
pub fn error_correlation(
    uncertainty: &BTreeMap<LandmarkKey, LandmarkMetrics>,
    errors_mm: &BTreeMap<LandmarkKey, f64>,
) -> Result<MetricCorrelations> {
    check_alignment(uncertainty, errors_mm)?;
    let y: Vec<f64> = errors_mm.values().copied().collect();
    let mut out = MetricCorrelations::default();
    for metric in Metric::ALL {
        let x: Vec<f64> = uncertainty.values().map(|m| m.get(metric)).collect();
        out.set(metric, defined(pearson(&PairedSeries::from_columns(&x, &y)?))?);
    }
    Ok(out)
}
