//! Annotation and prediction-sample domain types.
//!
//! Every point carries the [`CoordinateSpace`] it was recorded in. Metrics are
//! computed in millimetres after mapping into a canonical space (by default
//! the original 1935×2400 cephalogram grid at 0.1 mm/px), so annotations that
//! arrive at a different resolution stay comparable.

mod corpus;
mod isbi;
mod samples;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub use corpus::{read_corpus, write_corpus, Corpus};
pub use isbi::{parse_isbi_annotation_file, write_isbi_annotation_file};
pub use samples::{read_samples, write_samples, SampleCorpus};

/// Pixel grid plus per-axis millimetre scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSpace {
    pub space_id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub mm_per_px_x: f64,
    pub mm_per_px_y: f64,
}

impl CoordinateSpace {
    pub fn new(
        space_id: impl Into<String>,
        width_px: u32,
        height_px: u32,
        mm_per_px_x: f64,
        mm_per_px_y: f64,
    ) -> Result<Self> {
        let space = CoordinateSpace {
            space_id: space_id.into(),
            width_px,
            height_px,
            mm_per_px_x,
            mm_per_px_y,
        };
        space.validate()?;
        Ok(space)
    }

    /// Original ISBI cephalogram grid: 1935×2400 px at 0.1 mm/px.
    pub fn isbi_original() -> Self {
        CoordinateSpace {
            space_id: "isbi_1935x2400".into(),
            width_px: 1935,
            height_px: 2400,
            mm_per_px_x: 0.1,
            mm_per_px_y: 0.1,
        }
    }

    /// The 640×800 training grid, with mm scale derived per axis from the original.
    pub fn isbi_downsampled() -> Self {
        Self::isbi_original()
            .resampled("isbi_640x800", 640, 800)
            .expect("static dimensions are positive")
    }

    /// A space covering the same field of view at a different pixel resolution.
    pub fn resampled(&self, space_id: impl Into<String>, width_px: u32, height_px: u32) -> Result<Self> {
        CoordinateSpace::new(
            space_id,
            width_px,
            height_px,
            self.mm_per_px_x * f64::from(self.width_px) / f64::from(width_px.max(1)),
            self.mm_per_px_y * f64::from(self.height_px) / f64::from(height_px.max(1)),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidParameter(format!(
                "space {}: dimensions must be positive",
                self.space_id
            )));
        }
        let scale_ok = |s: f64| s.is_finite() && s > 0.0;
        if !scale_ok(self.mm_per_px_x) || !scale_ok(self.mm_per_px_y) {
            return Err(Error::InvalidParameter(format!(
                "space {}: mm per pixel must be positive",
                self.space_id
            )));
        }
        if self.space_id.is_empty() {
            return Err(Error::InvalidParameter("space id must be non-empty".into()));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=f64::from(self.width_px)).contains(&x) && (0.0..=f64::from(self.height_px)).contains(&y)
    }
}

/// A 2D landmark position in pixels of a declared space.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkPoint {
    pub x: f64,
    pub y: f64,
    pub space: Arc<CoordinateSpace>,
}

impl LandmarkPoint {
    pub fn new(x: f64, y: f64, space: Arc<CoordinateSpace>) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidData(format!("non-finite coordinate ({x}, {y})")));
        }
        Ok(LandmarkPoint { x, y, space })
    }

    /// Rescales into `target`, which is assumed to cover the same field of view.
    pub fn convert_space(&self, target: &Arc<CoordinateSpace>) -> LandmarkPoint {
        if Arc::ptr_eq(&self.space, target) || *self.space == **target {
            return LandmarkPoint {
                x: self.x,
                y: self.y,
                space: Arc::clone(target),
            };
        }
        let sx = f64::from(target.width_px) / f64::from(self.space.width_px);
        let sy = f64::from(target.height_px) / f64::from(self.space.height_px);
        LandmarkPoint {
            x: self.x * sx,
            y: self.y * sy,
            space: Arc::clone(target),
        }
    }

    pub fn to_mm(&self) -> (f64, f64) {
        (self.x * self.space.mm_per_px_x, self.y * self.space.mm_per_px_y)
    }

    /// Millimetre coordinates after mapping into `canonical`.
    pub fn canonical_mm(&self, canonical: &Arc<CoordinateSpace>) -> [f64; 2] {
        let (x, y) = self.convert_space(canonical).to_mm();
        [x, y]
    }

    pub fn in_bounds(&self) -> bool {
        self.space.contains(self.x, self.y)
    }
}

/// `(scan_id, landmark_id)`; ordering defines every report's row order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LandmarkKey {
    pub scan_id: String,
    pub landmark_id: u32,
}

impl LandmarkKey {
    pub fn new(scan_id: impl Into<String>, landmark_id: u32) -> Self {
        LandmarkKey {
            scan_id: scan_id.into(),
            landmark_id,
        }
    }
}

impl fmt::Display for LandmarkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.scan_id, self.landmark_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkDefinition {
    pub landmark_id: u32,
    pub name: String,
}

impl LandmarkDefinition {
    /// Checks that ids run 0..K in order and names are unique.
    pub fn validate_all(defs: &[LandmarkDefinition]) -> Result<()> {
        let mut names = HashSet::new();
        for (i, def) in defs.iter().enumerate() {
            if def.landmark_id as usize != i {
                return Err(Error::InvalidData(format!(
                    "landmark ids must be contiguous from 0; found {} at position {i}",
                    def.landmark_id
                )));
            }
            if !names.insert(def.name.as_str()) {
                return Err(Error::InvalidData(format!("duplicate landmark name {}", def.name)));
            }
        }
        Ok(())
    }
}

/// All raters' annotations of one landmark on one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    key: LandmarkKey,
    rater_points: Vec<(String, LandmarkPoint)>,
}

impl AnnotationSet {
    pub fn new(key: LandmarkKey, rater_points: Vec<(String, LandmarkPoint)>) -> Result<Self> {
        let Some((_, first)) = rater_points.first() else {
            return Err(Error::Empty("annotation set"));
        };
        let space = &first.space;
        let mut seen = HashSet::new();
        for (rater, point) in &rater_points {
            if !seen.insert(rater.as_str()) {
                return Err(Error::InvalidData(format!("{key}: duplicate rater {rater}")));
            }
            if point.space != *space {
                return Err(Error::InvalidData(format!("{key}: raters use different spaces")));
            }
        }
        Ok(AnnotationSet { key, rater_points })
    }

    pub fn key(&self) -> &LandmarkKey {
        &self.key
    }

    pub fn scan_id(&self) -> &str {
        &self.key.scan_id
    }

    pub fn landmark_id(&self) -> u32 {
        self.key.landmark_id
    }

    pub fn rater_points(&self) -> &[(String, LandmarkPoint)] {
        &self.rater_points
    }

    pub fn n_raters(&self) -> usize {
        self.rater_points.len()
    }

    pub fn space(&self) -> &Arc<CoordinateSpace> {
        &self.rater_points[0].1.space
    }

    pub fn point_of(&self, rater_id: &str) -> Option<&LandmarkPoint> {
        self.rater_points.iter().find(|(r, _)| r == rater_id).map(|(_, p)| p)
    }

    pub fn cloud_mm(&self, canonical: &Arc<CoordinateSpace>) -> PointCloud {
        PointCloud::from_xy(self.rater_points.iter().map(|(_, p)| p.canonical_mm(canonical)))
            .expect("annotation sets are non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raters,
    McDropout,
    Ensemble,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Raters => "raters",
            Provenance::McDropout => "mc_dropout",
            Provenance::Ensemble => "ensemble",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub point: LandmarkPoint,
    pub heatmap_max: Option<f64>,
}

/// T prediction samples for one landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    key: LandmarkKey,
    provenance: Provenance,
    samples: Vec<Sample>,
}

impl SampleSet {
    pub fn new(key: LandmarkKey, provenance: Provenance, samples: Vec<Sample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Empty("sample set"));
        };
        let has_conf = first.heatmap_max.is_some();
        for s in &samples {
            if s.heatmap_max.is_some() != has_conf {
                return Err(Error::InvalidData(format!(
                    "{key}: heatmap_max must be present for all samples or none"
                )));
            }
            if let Some(h) = s.heatmap_max {
                if !h.is_finite() {
                    return Err(Error::InvalidData(format!("{key}: non-finite heatmap_max")));
                }
                if h < 0.0 {
                    return Err(Error::NegativeHeatmap(h));
                }
            }
            if s.point.space != first.point.space {
                return Err(Error::InvalidData(format!("{key}: samples use different spaces")));
            }
        }
        Ok(SampleSet {
            key,
            provenance,
            samples,
        })
    }

    /// Treats each rater annotation as an equally confident sample.
    pub fn from_annotations(set: &AnnotationSet) -> SampleSet {
        SampleSet {
            key: set.key.clone(),
            provenance: Provenance::Raters,
            samples: set
                .rater_points
                .iter()
                .map(|(_, p)| Sample {
                    point: p.clone(),
                    heatmap_max: None,
                })
                .collect(),
        }
    }

    pub fn key(&self) -> &LandmarkKey {
        &self.key
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn space(&self) -> &Arc<CoordinateSpace> {
        &self.samples[0].point.space
    }

    pub fn heatmap_maxima(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.heatmap_max).collect()
    }

    pub fn cloud_mm(&self, canonical: &Arc<CoordinateSpace>) -> PointCloud {
        PointCloud::from_xy(self.samples.iter().map(|s| s.point.canonical_mm(canonical)))
            .expect("sample sets are non-empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(w: u32, h: u32, s: f64) -> Arc<CoordinateSpace> {
        Arc::new(CoordinateSpace::new(format!("{w}x{h}"), w, h, s, s).unwrap())
    }

    #[test]
    fn corner_and_origin_map_across_spaces() {
        let orig = Arc::new(CoordinateSpace::isbi_original());
        let small = Arc::new(CoordinateSpace::isbi_downsampled());
        let corner = LandmarkPoint::new(1935.0, 2400.0, orig.clone()).unwrap();
        let c = corner.convert_space(&small);
        assert_eq!((c.x, c.y), (640.0, 800.0));
        let o = LandmarkPoint::new(0.0, 0.0, orig.clone())
            .unwrap()
            .convert_space(&small);
        assert_eq!((o.x, o.y), (0.0, 0.0));
        let mid = LandmarkPoint::new(967.5, 1200.0, orig).unwrap().convert_space(&small);
        assert!((mid.x - 320.0).abs() < 1e-12 && (mid.y - 400.0).abs() < 1e-12);
    }

    #[test]
    fn downsampled_scale_is_derived_per_axis() {
        let small = CoordinateSpace::isbi_downsampled();
        assert!((small.mm_per_px_x - 0.1 * 1935.0 / 640.0).abs() < 1e-15);
        assert!((small.mm_per_px_y - 0.3).abs() < 1e-15);
    }

    #[test]
    fn to_mm_examples() {
        let p = LandmarkPoint::new(10.0, 20.0, space(100, 100, 0.1)).unwrap();
        let (x, y) = p.to_mm();
        assert!((x - 1.0).abs() < 1e-15 && (y - 2.0).abs() < 1e-15);
        let p = LandmarkPoint::new(3.0, 4.0, space(100, 100, 0.3)).unwrap();
        let (x, y) = p.to_mm();
        assert!((x - 0.9).abs() < 1e-12 && (y - 1.2).abs() < 1e-12);
        assert_eq!(
            LandmarkPoint::new(0.0, 0.0, space(5, 5, 0.3)).unwrap().to_mm(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn invalid_spaces_rejected() {
        assert!(CoordinateSpace::new("a", 0, 10, 0.1, 0.1).is_err());
        assert!(CoordinateSpace::new("a", 10, 10, -0.1, 0.1).is_err());
        assert!(CoordinateSpace::new("a", 10, 10, 0.1, f64::NAN).is_err());
        assert!(CoordinateSpace::new("", 10, 10, 0.1, 0.1).is_err());
    }

    #[test]
    fn out_of_bounds_points_are_kept_and_flagged() {
        let p = LandmarkPoint::new(-3.0, 5.0, space(10, 10, 0.1)).unwrap();
        assert!(!p.in_bounds());
        assert!(LandmarkPoint::new(f64::INFINITY, 0.0, space(10, 10, 0.1)).is_err());
    }

    #[test]
    fn annotation_set_invariants() {
        let s = space(10, 10, 0.1);
        let p = |x| LandmarkPoint::new(x, 1.0, s.clone()).unwrap();
        let key = LandmarkKey::new("s1", 0);
        assert!(AnnotationSet::new(key.clone(), vec![]).is_err());
        assert!(AnnotationSet::new(key.clone(), vec![("a".into(), p(1.0)), ("a".into(), p(2.0))]).is_err());
        let other = LandmarkPoint::new(1.0, 1.0, space(20, 20, 0.1)).unwrap();
        assert!(AnnotationSet::new(key.clone(), vec![("a".into(), p(1.0)), ("b".into(), other)]).is_err());
        let set = AnnotationSet::new(key, vec![("a".into(), p(1.0)), ("b".into(), p(2.0))]).unwrap();
        assert_eq!(set.n_raters(), 2);
        assert_eq!(set.point_of("b").unwrap().x, 2.0);
    }

    #[test]
    fn sample_set_invariants() {
        let s = space(10, 10, 0.1);
        let sample = |h| Sample {
            point: LandmarkPoint::new(1.0, 1.0, s.clone()).unwrap(),
            heatmap_max: h,
        };
        let key = LandmarkKey::new("s1", 0);
        assert!(SampleSet::new(key.clone(), Provenance::McDropout, vec![]).is_err());
        assert!(SampleSet::new(
            key.clone(),
            Provenance::McDropout,
            vec![sample(Some(1.0)), sample(None)]
        )
        .is_err());
        assert!(matches!(
            SampleSet::new(key.clone(), Provenance::McDropout, vec![sample(Some(-0.5))]),
            Err(Error::NegativeHeatmap(_))
        ));
        let set = SampleSet::new(key, Provenance::Ensemble, vec![sample(Some(0.5)), sample(Some(0.7))]).unwrap();
        assert_eq!(set.heatmap_maxima(), Some(vec![0.5, 0.7]));
    }

    #[test]
    fn landmark_definitions_validated() {
        let d = |id, n: &str| LandmarkDefinition {
            landmark_id: id,
            name: n.into(),
        };
        assert!(LandmarkDefinition::validate_all(&[d(0, "Sella"), d(1, "Nasion")]).is_ok());
        assert!(LandmarkDefinition::validate_all(&[d(0, "Sella"), d(2, "Nasion")]).is_err());
        assert!(LandmarkDefinition::validate_all(&[d(0, "Sella"), d(1, "Sella")]).is_err());
    }
}
