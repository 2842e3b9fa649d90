//! Seeded generators for annotation corpora and prediction samples with known
//! ground truth.
//!
//! Rater annotations of landmark `k` on scan `s` are drawn from
//! `N(center_k, m_s² Σ_k)`, where `m_s` is a per-scan spread multiplier
//! (log-uniform over [`GeneratorSpec::scan_spread`]). Prediction samples for
//! a strategy are drawn around a jittered center with covariance
//! `f² Σ_k`, scaled by `m_s²` as well when the strategy is coupled to the
//! raters' variability.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{
    AnnotationSet, CoordinateSpace, Corpus, LandmarkDefinition, LandmarkKey, LandmarkPoint, Sample, SampleCorpus,
    SampleSet,
};
use crate::error::{Error, Result};
use crate::fusion::FusionStrategy;
use crate::geometry::eigen_symmetric_2;

/// Default number of MC-dropout samples per landmark.
pub const MC_SAMPLES: usize = 20;

const STREAM_SCAN_SPREAD: u64 = 1;
const STREAM_ANNOTATIONS: u64 = 2;
const STREAM_PREDICTIONS: u64 = 16;

/// Zero-mean bivariate normal draws colored by a Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    mean: [f64; 2],
    chol: [[f64; 2]; 2],
    covariance: [[f64; 2]; 2],
}

impl Gaussian2 {
    /// `covariance` must be symmetric positive semi-definite.
    pub fn new(mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [b2, c]] = covariance;
        let scale = a.abs().max(c.abs()).max(1.0);
        let finite = covariance.iter().flatten().all(|v| v.is_finite());
        if !finite || (b - b2).abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter(
                "covariance must be finite and symmetric".into(),
            ));
        }
        if a < 0.0 || c < 0.0 || a * c - b * b < -1e-12 * scale * scale {
            return Err(Error::InvalidParameter(
                "covariance must be positive semi-definite".into(),
            ));
        }
        let l11 = a.sqrt();
        let l21 = if l11 > 0.0 { b / l11 } else { 0.0 };
        if l11 == 0.0 && b != 0.0 {
            return Err(Error::InvalidParameter(
                "covariance must be positive semi-definite".into(),
            ));
        }
        let l22 = (c - l21 * l21).max(0.0).sqrt();
        Ok(Gaussian2 {
            mean,
            chol: [[l11, 0.0], [l21, l22]],
            covariance,
        })
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance
    }

    /// Principal standard deviation, `√λ_max`.
    pub fn principal_sigma(&self) -> f64 {
        eigen_symmetric_2(self.covariance).0[0].max(0.0).sqrt()
    }

    /// One draw; consumes one Box-Muller pair.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let [z0, z1] = box_muller(rng);
        let l = &self.chol;
        [self.mean[0] + l[0][0] * z0, self.mean[1] + l[1][0] * z0 + l[1][1] * z1]
    }
}

fn box_muller<R: Rng>(rng: &mut R) -> [f64; 2] {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    [r * theta.cos(), r * theta.sin()]
}

/// Covariance with standard deviations `sigma` along axes rotated by `theta` radians.
pub fn rotated_covariance(sigma: [f64; 2], theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let (v1, v2) = (sigma[0] * sigma[0], sigma[1] * sigma[1]);
    let off = (v1 - v2) * c * s;
    [[v1 * c * c + v2 * s * s, off], [off, v1 * s * s + v2 * c * c]]
}

/// `n` seeded draws from `N(mean, covariance)`.
pub fn gaussian_cloud(seed: u64, n: usize, mean: [f64; 2], covariance: [[f64; 2]; 2]) -> Result<Vec<[f64; 2]>> {
    let g = Gaussian2::new(mean, covariance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| g.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkModel {
    pub name: String,
    pub center_mm: [f64; 2],
    pub covariance_mm2: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceModel {
    /// Every sample reports the same heatmap peak.
    Constant(f64),
    /// `exp(-‖y - c‖² / 2σ²)` with `σ` the principal std of the generating covariance.
    SpreadCoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_scans: usize,
    pub n_raters: usize,
    pub landmarks: Vec<LandmarkModel>,
    pub confidence: ConfidenceModel,
    /// Range of the per-scan std multiplier; `[1, 1]` disables scan variation.
    pub scan_spread: [f64; 2],
    /// Space the generated pixel coordinates are expressed in.
    pub space: CoordinateSpace,
}

impl GeneratorSpec {
    /// 100 scans × 5 landmarks × 11 raters on the original cephalogram grid.
    pub fn cephalometric(seed: u64) -> Self {
        let deg = std::f64::consts::PI / 180.0;
        let landmark = |i: usize, center: [f64; 2], sigma: [f64; 2], theta: f64| LandmarkModel {
            name: format!("landmark_{i}"),
            center_mm: center,
            covariance_mm2: rotated_covariance(sigma, theta * deg),
        };
        GeneratorSpec {
            seed,
            n_scans: 100,
            n_raters: 11,
            landmarks: vec![
                landmark(0, [80.0, 95.0], [1.2, 0.8], 10.0),
                landmark(1, [145.0, 85.0], [1.6, 0.7], -35.0),
                landmark(2, [120.0, 150.0], [2.4, 1.0], 60.0),
                landmark(3, [130.0, 190.0], [1.0, 0.9], 0.0),
                landmark(4, [95.0, 175.0], [3.0, 1.1], 80.0),
            ],
            confidence: ConfidenceModel::SpreadCoupled,
            scan_spread: [0.4, 2.5],
            space: CoordinateSpace::isbi_original(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_scans == 0 || self.n_raters == 0 || self.landmarks.is_empty() {
            return Err(Error::InvalidParameter(
                "scan, rater and landmark counts must be at least 1".into(),
            ));
        }
        let [lo, hi] = self.scan_spread;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter("scan_spread must satisfy 0 < lo <= hi".into()));
        }
        if let ConfidenceModel::Constant(h) = self.confidence {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::InvalidParameter(
                    "constant confidence must be non-negative".into(),
                ));
            }
        }
        for lm in &self.landmarks {
            Gaussian2::new(lm.center_mm, lm.covariance_mm2)?;
        }
        self.space.validate()
    }

    pub fn scan_id(&self, scan: usize) -> String {
        format!("scan_{scan:03}")
    }

    pub fn rater_id(&self, rater: usize) -> String {
        format!("rater_{rater:02}")
    }

    /// Per-scan std multipliers, independent of every other draw.
    pub fn scan_multipliers(&self) -> Vec<f64> {
        let mut rng = stream_rng(self.seed, STREAM_SCAN_SPREAD);
        let [lo, hi] = self.scan_spread;
        (0..self.n_scans)
            .map(|_| {
                let u: f64 = rng.random();
                (lo.ln() + u * (hi.ln() - lo.ln())).exp()
            })
            .collect()
    }

    fn point(&self, mm: [f64; 2], space: &Arc<CoordinateSpace>) -> LandmarkPoint {
        LandmarkPoint {
            x: mm[0] / space.mm_per_px_x,
            y: mm[1] / space.mm_per_px_y,
            space: Arc::clone(space),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn scaled(cov: [[f64; 2]; 2], factor: f64) -> [[f64; 2]; 2] {
    let f2 = factor * factor;
    [[cov[0][0] * f2, cov[0][1] * f2], [cov[1][0] * f2, cov[1][1] * f2]]
}

pub fn generate_annotations(spec: &GeneratorSpec) -> Result<Corpus> {
    spec.validate()?;
    let space = Arc::new(spec.space.clone());
    let multipliers = spec.scan_multipliers();
    let mut rng = stream_rng(spec.seed, STREAM_ANNOTATIONS);
    let mut sets = Vec::with_capacity(spec.n_scans * spec.landmarks.len());
    for (scan, m) in multipliers.iter().enumerate() {
        for (k, lm) in spec.landmarks.iter().enumerate() {
            let g = Gaussian2::new(lm.center_mm, scaled(lm.covariance_mm2, *m))?;
            let raters = (0..spec.n_raters)
                .map(|r| (spec.rater_id(r), spec.point(g.sample(&mut rng), &space)))
                .collect();
            sets.push(AnnotationSet::new(
                LandmarkKey::new(spec.scan_id(scan), k as u32),
                raters,
            )?);
        }
    }
    let landmarks = spec
        .landmarks
        .iter()
        .enumerate()
        .map(|(i, lm)| LandmarkDefinition {
            landmark_id: i as u32,
            name: lm.name.clone(),
        })
        .collect();
    Corpus::new(landmarks, sets)
}

/// How a strategy's simulated predictions relate to the raters' spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionModel {
    /// Std multiplier relative to the landmark's rater covariance.
    pub spread_factor: f64,
    /// Whether the per-scan multiplier also scales the predictions.
    pub coupled: bool,
    /// Std of the prediction center's offset, relative to the sample spread.
    pub offset_factor: f64,
}

impl PredictionModel {
    /// Ensemble spread < random-sampling spread < a widened, uncoupled averaging spread.
    pub fn for_strategy(strategy: FusionStrategy) -> Self {
        match strategy {
            FusionStrategy::Averaging => PredictionModel {
                spread_factor: 1.6,
                coupled: false,
                offset_factor: 0.5,
            },
            FusionStrategy::RandomSampling => PredictionModel {
                spread_factor: 1.0,
                coupled: true,
                offset_factor: 0.5,
            },
            FusionStrategy::DeepEnsembles => PredictionModel {
                spread_factor: 0.7,
                coupled: true,
                offset_factor: 0.5,
            },
        }
    }
}

pub fn generate_prediction_samples(spec: &GeneratorSpec, strategy: FusionStrategy, t: usize) -> Result<SampleCorpus> {
    generate_prediction_samples_with(spec, strategy, PredictionModel::for_strategy(strategy), t)
}

pub fn generate_prediction_samples_with(
    spec: &GeneratorSpec,
    strategy: FusionStrategy,
    model: PredictionModel,
    t: usize,
) -> Result<SampleCorpus> {
    spec.validate()?;
    if t == 0 {
        return Err(Error::InvalidParameter("sample count T must be at least 1".into()));
    }
    if !(model.spread_factor >= 0.0 && model.offset_factor >= 0.0) {
        return Err(Error::InvalidParameter(
            "prediction model factors must be non-negative".into(),
        ));
    }
    let space = Arc::new(spec.space.clone());
    let multipliers = spec.scan_multipliers();
    let strategy_index = FusionStrategy::ALL
        .iter()
        .position(|s| *s == strategy)
        .expect("known strategy") as u64;
    let mut rng = stream_rng(spec.seed, STREAM_PREDICTIONS + strategy_index);
    let provenance = strategy.expected_provenance();
    let mut sets = Vec::with_capacity(spec.n_scans * spec.landmarks.len());
    for (scan, m) in multipliers.iter().enumerate() {
        for (k, lm) in spec.landmarks.iter().enumerate() {
            let factor = model.spread_factor * if model.coupled { *m } else { 1.0 };
            let spread = scaled(lm.covariance_mm2, factor);
            let offset = Gaussian2::new([0.0, 0.0], scaled(spread, model.offset_factor))?.sample(&mut rng);
            let center = [lm.center_mm[0] + offset[0], lm.center_mm[1] + offset[1]];
            let g = Gaussian2::new(center, spread)?;
            let sigma_ref = g.principal_sigma();
            let samples = (0..t)
                .map(|_| {
                    let y = g.sample(&mut rng);
                    let heatmap_max = match spec.confidence {
                        ConfidenceModel::Constant(h) => h,
                        ConfidenceModel::SpreadCoupled if sigma_ref > 0.0 => {
                            let d2 = (y[0] - center[0]).powi(2) + (y[1] - center[1]).powi(2);
                            (-d2 / (2.0 * sigma_ref * sigma_ref)).exp()
                        }
                        ConfidenceModel::SpreadCoupled => 1.0,
                    };
                    Sample {
                        point: spec.point(y, &space),
                        heatmap_max: Some(heatmap_max),
                    }
                })
                .collect();
            sets.push(SampleSet::new(
                LandmarkKey::new(spec.scan_id(scan), k as u32),
                provenance,
                samples,
            )?);
        }
    }
    SampleCorpus::new(sets)
}

/// Default sample count per strategy: 20 MC-dropout passes, or one model per rater.
pub fn default_sample_count(spec: &GeneratorSpec, strategy: FusionStrategy) -> usize {
    match strategy {
        FusionStrategy::DeepEnsembles => spec.n_raters,
        _ => MC_SAMPLES,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{cvar, psv};

    fn small_spec() -> GeneratorSpec {
        GeneratorSpec {
            n_scans: 4,
            ..GeneratorSpec::cephalometric(11)
        }
    }

    #[test]
    fn zero_covariance_collapses_to_center() {
        let mut spec = small_spec();
        for lm in &mut spec.landmarks {
            lm.covariance_mm2 = [[0.0, 0.0], [0.0, 0.0]];
        }
        let corpus = generate_annotations(&spec).unwrap();
        let canonical = Arc::new(spec.space.clone());
        for set in corpus.sets() {
            let cloud = set.cloud_mm(&canonical);
            assert!(cvar(&cloud) < 1e-12);
            assert!(psv(&cloud).unwrap() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = small_spec();
        assert_eq!(
            generate_annotations(&spec).unwrap(),
            generate_annotations(&spec).unwrap()
        );
        let a = generate_prediction_samples(&spec, FusionStrategy::RandomSampling, 20).unwrap();
        let b = generate_prediction_samples(&spec, FusionStrategy::RandomSampling, 20).unwrap();
        assert_eq!(a, b);
        let other = GeneratorSpec { seed: 12, ..spec };
        assert_ne!(
            generate_annotations(&other).unwrap(),
            generate_annotations(&small_spec()).unwrap()
        );
    }

    #[test]
    fn corpus_shape() {
        let spec = GeneratorSpec::cephalometric(1);
        let corpus = generate_annotations(&spec).unwrap();
        assert_eq!(corpus.n_records(), 5500);
        assert_eq!(corpus.sets().len(), 500);
        let ens = generate_prediction_samples(&spec, FusionStrategy::DeepEnsembles, 11).unwrap();
        assert_eq!(ens.len(), 500);
        assert!(ens.iter().all(|s| s.len() == 11));
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = small_spec();
        spec.landmarks[0].covariance_mm2 = [[1.0, 2.0], [2.0, 1.0]];
        assert!(generate_annotations(&spec).is_err());
        let mut spec = small_spec();
        spec.landmarks[0].covariance_mm2 = [[1.0, 0.5], [0.0, 1.0]];
        assert!(generate_annotations(&spec).is_err());
        assert!(generate_prediction_samples(&small_spec(), FusionStrategy::Averaging, 0).is_err());
        let spec = GeneratorSpec {
            n_raters: 0,
            ..small_spec()
        };
        assert!(generate_annotations(&spec).is_err());
    }

    #[test]
    fn empirical_covariance_converges() {
        let cov = rotated_covariance([3.0, 1.0], 0.5);
        let pts = gaussian_cloud(5, 10_000, [0.0, 0.0], cov).unwrap();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        let mut emp = [[0.0; 2]; 2];
        for p in &pts {
            let d = [p[0] - mx, p[1] - my];
            for i in 0..2 {
                for j in 0..2 {
                    emp[i][j] += d[i] * d[j] / n;
                }
            }
        }
        let frob = |m: [[f64; 2]; 2]| m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let diff = [
            [emp[0][0] - cov[0][0], emp[0][1] - cov[0][1]],
            [emp[1][0] - cov[1][0], emp[1][1] - cov[1][1]],
        ];
        assert!(frob(diff) <= 0.05 * frob(cov), "{}", frob(diff) / frob(cov));
    }
}
