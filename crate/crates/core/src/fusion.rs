//! Multi-rater annotation fusion as data-level operations.
//!
//! Training is external, so each strategy is represented by what crosses the
//! trainer boundary: averaged targets, a reproducible rater-sampling schedule,
//! or aggregation of per-rater model outputs.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, Corpus, LandmarkPoint, Provenance, SampleSet};
use crate::error::{Error, Result};
use crate::geometry::centroid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    Averaging,
    RandomSampling,
    DeepEnsembles,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 3] = [
        FusionStrategy::Averaging,
        FusionStrategy::RandomSampling,
        FusionStrategy::DeepEnsembles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::Averaging => "averaging",
            FusionStrategy::RandomSampling => "random_sampling",
            FusionStrategy::DeepEnsembles => "deep_ensembles",
        }
    }

    /// Sample provenance produced by a model trained under this strategy.
    pub fn expected_provenance(self) -> Provenance {
        match self {
            FusionStrategy::Averaging | FusionStrategy::RandomSampling => Provenance::McDropout,
            FusionStrategy::DeepEnsembles => Provenance::Ensemble,
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "averaging" => Ok(FusionStrategy::Averaging),
            "random_sampling" => Ok(FusionStrategy::RandomSampling),
            "deep_ensembles" | "ensemble" => Ok(FusionStrategy::DeepEnsembles),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

fn mean_point<'a>(points: impl Iterator<Item = &'a LandmarkPoint> + Clone) -> LandmarkPoint {
    let first = points.clone().next().expect("non-empty");
    let space = first.space.clone();
    let coords: Vec<[f64; 2]> = points.map(|p| [p.x, p.y]).collect();
    let c = centroid(coords.iter().map(|p| p.as_slice()), 2);
    LandmarkPoint {
        x: c[0],
        y: c[1],
        space,
    }
}

/// Silver ground truth: the componentwise mean of all raters, in the set's space.
pub fn average_annotations(set: &AnnotationSet) -> LandmarkPoint {
    mean_point(set.rater_points().iter().map(|(_, p)| p))
}

/// Mean of per-rater model outputs.
pub fn aggregate_ensemble(samples: &SampleSet) -> Result<LandmarkPoint> {
    if samples.provenance() != Provenance::Ensemble {
        return Err(Error::ProvenanceMismatch {
            expected: Provenance::Ensemble.to_string(),
            found: samples.provenance().to_string(),
        });
    }
    Ok(mean_point(samples.samples().iter().map(|s| &s.point)))
}

/// The single evaluated prediction for a landmark: the mean of its samples.
pub fn fused_prediction(strategy: FusionStrategy, samples: &SampleSet) -> Result<LandmarkPoint> {
    let expected = strategy.expected_provenance();
    if samples.provenance() != expected {
        return Err(Error::ProvenanceMismatch {
            expected: expected.to_string(),
            found: samples.provenance().to_string(),
        });
    }
    match strategy {
        FusionStrategy::DeepEnsembles => aggregate_ensemble(samples),
        _ => Ok(mean_point(samples.samples().iter().map(|s| &s.point))),
    }
}

/// Seeded stream of rater indices in `[0, n_raters)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingSchedule {
    pub seed: u64,
    pub stream: u64,
    pub n_raters: usize,
}

impl SamplingSchedule {
    pub fn new(seed: u64, n_raters: usize) -> Result<Self> {
        if n_raters == 0 {
            return Err(Error::InvalidParameter("n_raters must be at least 1".into()));
        }
        Ok(SamplingSchedule {
            seed,
            stream: 0,
            n_raters,
        })
    }

    /// An independent schedule sharing the seed.
    pub fn with_stream(self, stream: u64) -> Self {
        SamplingSchedule { stream, ..self }
    }

    pub fn draws(&self) -> impl Iterator<Item = usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        let n = self.n_raters;
        std::iter::repeat_with(move || rng.random_range(0..n))
    }
}

pub fn sampling_schedule(seed: u64, n_raters: usize, n_draws: usize) -> Result<Vec<usize>> {
    Ok(SamplingSchedule::new(seed, n_raters)?.draws().take(n_draws).collect())
}

/// One training target choice for the random-sampling strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub iteration: usize,
    pub scan_id: String,
    pub landmark_id: u32,
    pub rater_id: String,
}

/// Rater choices for every `(scan, landmark)` in `corpus` over `iterations`.
///
/// Each annotation set draws from its own stream (its index in corpus order),
/// so extending `iterations` never changes earlier entries. `scans`, when
/// given, restricts the schedule to those scans (e.g. a training fold).
pub fn training_schedule(
    corpus: &Corpus,
    seed: u64,
    iterations: usize,
    scans: Option<&[String]>,
) -> Result<Vec<ScheduleEntry>> {
    let mut columns = Vec::new();
    for (idx, set) in corpus.sets().iter().enumerate() {
        if scans.is_some_and(|s| !s.iter().any(|id| id == set.scan_id())) {
            continue;
        }
        let draws: Vec<usize> = SamplingSchedule::new(seed, set.n_raters())?
            .with_stream(idx as u64)
            .draws()
            .take(iterations)
            .collect();
        columns.push((set, draws));
    }
    let mut entries = Vec::with_capacity(columns.len() * iterations);
    for iteration in 0..iterations {
        for (set, draws) in &columns {
            entries.push(ScheduleEntry {
                iteration,
                scan_id: set.scan_id().to_string(),
                landmark_id: set.landmark_id(),
                rater_id: set.rater_points()[draws[iteration]].0.clone(),
            });
        }
    }
    Ok(entries)
}

pub fn write_schedule<W: Write>(mut out: W, entries: &[ScheduleEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
