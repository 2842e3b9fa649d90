//! Prediction-sample JSON-lines files.
//!
//! Each record is `{"scan_id", "landmark_id", "provenance", "samples": [{"x", "y", "heatmap_max"?}]}`
//! with an optional `"space_id"`. An optional first line `{"spaces": [...]}`
//! declares the spaces; records without a `space_id` use the sole declared
//! space or the caller's default.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::corpus::Header;
use super::{CoordinateSpace, LandmarkKey, LandmarkPoint, Provenance, Sample, SampleSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    scan_id: String,
    landmark_id: u32,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    space_id: Option<String>,
    samples: Vec<SampleEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleEntry {
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    heatmap_max: Option<f64>,
}

/// Prediction sample sets keyed by `(scan_id, landmark_id)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleCorpus {
    sets: BTreeMap<LandmarkKey, SampleSet>,
}

impl SampleCorpus {
    pub fn new(sets: impl IntoIterator<Item = SampleSet>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for set in sets {
            let key = set.key().clone();
            if map.insert(key.clone(), set).is_some() {
                return Err(Error::InvalidData(format!("duplicate sample set {key}")));
            }
        }
        Ok(SampleCorpus { sets: map })
    }

    pub fn get(&self, key: &LandmarkKey) -> Option<&SampleSet> {
        self.sets.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SampleSet> {
        self.sets.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &LandmarkKey> {
        self.sets.keys()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// The single provenance shared by all sets, if any.
    pub fn provenance(&self) -> Option<Provenance> {
        let mut it = self.sets.values().map(SampleSet::provenance);
        let first = it.next()?;
        it.all(|p| p == first).then_some(first)
    }
}

pub fn read_samples<R: BufRead>(reader: R, default_space: Option<&Arc<CoordinateSpace>>) -> Result<SampleCorpus> {
    let mut spaces: BTreeMap<String, Arc<CoordinateSpace>> = BTreeMap::new();
    let mut sets = Vec::new();
    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) {
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
            if value.get("spaces").is_some() {
                let header: Header = serde_json::from_value(value).map_err(|e| Error::parse(line_no, e.to_string()))?;
                for space in header.spaces {
                    space.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
                    spaces.insert(space.space_id.clone(), Arc::new(space));
                }
                continue;
            }
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let space = match &rec.space_id {
            Some(id) => spaces
                .get(id)
                .or_else(|| default_space.filter(|s| s.space_id == *id))
                .ok_or_else(|| Error::parse(line_no, format!("undeclared space {id}")))?,
            None if spaces.len() == 1 => spaces.values().next().expect("one space"),
            None => default_space.ok_or_else(|| Error::parse(line_no, "no space_id and no default space"))?,
        };
        let samples = rec
            .samples
            .into_iter()
            .map(|s| {
                Ok(Sample {
                    point: LandmarkPoint::new(s.x, s.y, Arc::clone(space))?,
                    heatmap_max: s.heatmap_max,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        let set = SampleSet::new(LandmarkKey::new(rec.scan_id, rec.landmark_id), rec.provenance, samples)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        sets.push(set);
    }
    if first {
        return Err(Error::EmptyFile);
    }
    SampleCorpus::new(sets)
}

pub fn write_samples<W: Write>(mut out: W, corpus: &SampleCorpus) -> Result<()> {
    let mut spaces: BTreeMap<&str, &CoordinateSpace> = BTreeMap::new();
    for set in corpus.iter() {
        spaces.insert(&set.space().space_id, set.space());
    }
    let header = Header {
        spaces: spaces.into_values().cloned().collect(),
        landmarks: Vec::new(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for set in corpus.iter() {
        let rec = SampleRecord {
            scan_id: set.key().scan_id.clone(),
            landmark_id: set.key().landmark_id,
            provenance: set.provenance(),
            space_id: Some(set.space().space_id.clone()),
            samples: set
                .samples()
                .iter()
                .map(|s| SampleEntry {
                    x: s.point.x,
                    y: s.point.y,
                    heatmap_max: s.heatmap_max,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_records_with_default_space() {
        let text = r#"{"scan_id":"001","landmark_id":0,"provenance":"mc_dropout","samples":[{"x":1,"y":2,"heatmap_max":0.9},{"x":3,"y":4,"heatmap_max":0.5}]}
{"scan_id":"001","landmark_id":1,"provenance":"mc_dropout","samples":[{"x":5,"y":6,"heatmap_max":1.0}]}
"#;
        let space = Arc::new(CoordinateSpace::isbi_downsampled());
        let corpus = read_samples(text.as_bytes(), Some(&space)).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.provenance(), Some(Provenance::McDropout));
        let set = corpus.get(&LandmarkKey::new("001", 0)).unwrap();
        assert_eq!(set.heatmap_maxima(), Some(vec![0.9, 0.5]));
        assert_eq!(set.space().space_id, "isbi_640x800");
        assert!(read_samples(text.as_bytes(), None).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        let text =
            r#"{"scan_id":"a","landmark_id":2,"provenance":"ensemble","samples":[{"x":1.25,"y":2},{"x":3,"y":4}]}"#;
        let space = Arc::new(CoordinateSpace::isbi_original());
        let corpus = read_samples(text.as_bytes(), Some(&space)).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &corpus).unwrap();
        assert_eq!(read_samples(buf.as_slice(), None).unwrap(), corpus);
    }

    #[test]
    fn rejects_mixed_confidence_and_negative_maxima() {
        let space = Arc::new(CoordinateSpace::isbi_original());
        let mixed = r#"{"scan_id":"a","landmark_id":0,"provenance":"ensemble","samples":[{"x":1,"y":2,"heatmap_max":1},{"x":3,"y":4}]}"#;
        assert!(matches!(
            read_samples(mixed.as_bytes(), Some(&space)),
            Err(Error::Parse { line: 1, .. })
        ));
        let neg =
            r#"{"scan_id":"a","landmark_id":0,"provenance":"ensemble","samples":[{"x":1,"y":2,"heatmap_max":-1}]}"#;
        assert!(read_samples(neg.as_bytes(), Some(&space)).is_err());
        let empty = r#"{"scan_id":"a","landmark_id":0,"provenance":"ensemble","samples":[]}"#;
        assert!(read_samples(empty.as_bytes(), Some(&space)).is_err());
    }
}
