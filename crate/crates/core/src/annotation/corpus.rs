//! Native JSON-lines annotation corpus.
//!
//! Line 1 is a header `{"spaces": [...], "landmarks": [...]}`; every other
//! line is one rater's annotation
//! `{"scan_id", "landmark_id", "rater_id", "x", "y", "space_id"}`.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, CoordinateSpace, LandmarkDefinition, LandmarkKey, LandmarkPoint};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct Header {
    pub spaces: Vec<CoordinateSpace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub landmarks: Vec<LandmarkDefinition>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    scan_id: String,
    landmark_id: u32,
    rater_id: String,
    x: f64,
    y: f64,
    space_id: String,
}

/// A multi-rater annotation corpus, ordered by `(scan_id, landmark_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    spaces: Vec<Arc<CoordinateSpace>>,
    landmarks: Vec<LandmarkDefinition>,
    sets: Vec<AnnotationSet>,
}

impl Corpus {
    pub fn new(landmarks: Vec<LandmarkDefinition>, mut sets: Vec<AnnotationSet>) -> Result<Self> {
        LandmarkDefinition::validate_all(&landmarks)?;
        sets.sort_by(|a, b| a.key().cmp(b.key()));
        for pair in sets.windows(2) {
            if pair[0].key() == pair[1].key() {
                return Err(Error::InvalidData(format!(
                    "duplicate annotation set {}",
                    pair[0].key()
                )));
            }
        }
        let mut spaces: BTreeMap<String, Arc<CoordinateSpace>> = BTreeMap::new();
        for set in &sets {
            if !landmarks.is_empty() && set.landmark_id() as usize >= landmarks.len() {
                return Err(Error::InvalidData(format!(
                    "{}: landmark id outside the {} declared landmarks",
                    set.key(),
                    landmarks.len()
                )));
            }
            let space = set.space();
            match spaces.entry(space.space_id.clone()) {
                Entry::Vacant(v) => {
                    v.insert(Arc::clone(space));
                }
                Entry::Occupied(o) if **o.get() != **space => {
                    return Err(Error::InvalidData(format!(
                        "space id {} declared with conflicting parameters",
                        space.space_id
                    )));
                }
                Entry::Occupied(_) => {}
            }
        }
        Ok(Corpus {
            spaces: spaces.into_values().collect(),
            landmarks,
            sets,
        })
    }

    pub fn sets(&self) -> &[AnnotationSet] {
        &self.sets
    }

    pub fn landmarks(&self) -> &[LandmarkDefinition] {
        &self.landmarks
    }

    pub fn spaces(&self) -> &[Arc<CoordinateSpace>] {
        &self.spaces
    }

    pub fn get(&self, key: &LandmarkKey) -> Option<&AnnotationSet> {
        self.sets
            .binary_search_by(|s| s.key().cmp(key))
            .ok()
            .map(|i| &self.sets[i])
    }

    pub fn scan_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.sets.iter().map(|s| s.scan_id()).collect();
        ids.into_iter().map(String::from).collect()
    }

    pub fn rater_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self
            .sets
            .iter()
            .flat_map(|s| s.rater_points().iter().map(|(r, _)| r.as_str()))
            .collect();
        ids.into_iter().map(String::from).collect()
    }

    pub fn n_landmarks(&self) -> usize {
        let ids: BTreeSet<u32> = self.sets.iter().map(|s| s.landmark_id()).collect();
        ids.len()
    }

    /// Number of individual rater annotations.
    pub fn n_records(&self) -> usize {
        self.sets.iter().map(AnnotationSet::n_raters).sum()
    }

    /// Annotations lying outside their declared grid.
    pub fn out_of_bounds(&self) -> Vec<(LandmarkKey, String)> {
        self.sets
            .iter()
            .flat_map(|s| {
                s.rater_points()
                    .iter()
                    .filter(|(_, p)| !p.in_bounds())
                    .map(|(r, _)| (s.key().clone(), r.clone()))
            })
            .collect()
    }
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (line_no, header) = lines.next().ok_or(Error::EmptyFile)?;
    let header: Header = serde_json::from_str(&header?).map_err(|e| Error::parse(line_no, format!("header: {e}")))?;
    let mut spaces = BTreeMap::new();
    for space in header.spaces {
        space.validate().map_err(|e| Error::parse(line_no, e.to_string()))?;
        spaces.insert(space.space_id.clone(), Arc::new(space));
    }

    let mut grouped: BTreeMap<LandmarkKey, Vec<(String, LandmarkPoint)>> = BTreeMap::new();
    for (line_no, line) in lines {
        let rec: AnnotationRecord = serde_json::from_str(&line?).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let space = spaces
            .get(&rec.space_id)
            .ok_or_else(|| Error::parse(line_no, format!("undeclared space {}", rec.space_id)))?;
        let point =
            LandmarkPoint::new(rec.x, rec.y, Arc::clone(space)).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let raters = grouped
            .entry(LandmarkKey::new(rec.scan_id, rec.landmark_id))
            .or_default();
        if raters.iter().any(|(r, _)| *r == rec.rater_id) {
            return Err(Error::parse(line_no, format!("duplicate rater {}", rec.rater_id)));
        }
        raters.push((rec.rater_id, point));
    }
    let sets = grouped
        .into_iter()
        .map(|(key, pts)| AnnotationSet::new(key, pts))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(header.landmarks, sets)
}

pub fn write_corpus<W: Write>(mut out: W, corpus: &Corpus) -> Result<()> {
    let header = Header {
        spaces: corpus.spaces.iter().map(|s| (**s).clone()).collect(),
        landmarks: corpus.landmarks.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for set in &corpus.sets {
        for (rater, p) in set.rater_points() {
            let rec = AnnotationRecord {
                scan_id: set.scan_id().to_string(),
                landmark_id: set.landmark_id(),
                rater_id: rater.clone(),
                x: p.x,
                y: p.y,
                space_id: p.space.space_id.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"spaces":[{"space_id":"s","width_px":10,"height_px":20,"mm_per_px_x":0.1,"mm_per_px_y":0.1}],"landmarks":[{"landmark_id":0,"name":"Sella"},{"landmark_id":1,"name":"Nasion"}]}
{"scan_id":"002","landmark_id":0,"rater_id":"r1","x":1.0,"y":2.0,"space_id":"s"}
{"scan_id":"001","landmark_id":1,"rater_id":"r1","x":3.0,"y":4.0,"space_id":"s"}
{"scan_id":"001","landmark_id":1,"rater_id":"r2","x":12.5,"y":4.0,"space_id":"s"}
"#;

    #[test]
    fn reads_and_groups_records() {
        let corpus = read_corpus(SAMPLE.as_bytes()).unwrap();
        assert_eq!(corpus.sets().len(), 2);
        assert_eq!(corpus.sets()[0].key(), &LandmarkKey::new("001", 1));
        assert_eq!(corpus.sets()[0].n_raters(), 2);
        assert_eq!(corpus.n_records(), 3);
        assert_eq!(corpus.scan_ids(), vec!["001", "002"]);
        assert_eq!(
            corpus.out_of_bounds(),
            vec![(LandmarkKey::new("001", 1), "r2".to_string())]
        );
    }

    #[test]
    fn reimport_is_byte_identical() {
        let corpus = read_corpus(SAMPLE.as_bytes()).unwrap();
        let mut first = Vec::new();
        write_corpus(&mut first, &corpus).unwrap();
        let again = read_corpus(first.as_slice()).unwrap();
        let mut second = Vec::new();
        write_corpus(&mut second, &again).unwrap();
        assert_eq!(first, second);
        assert_eq!(corpus, again);
    }

    #[test]
    fn rejects_bad_records() {
        let header = SAMPLE.lines().next().unwrap();
        let undeclared = format!(
            "{header}\n{}\n",
            r#"{"scan_id":"1","landmark_id":0,"rater_id":"a","x":1,"y":1,"space_id":"zz"}"#
        );
        assert!(matches!(
            read_corpus(undeclared.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let dup = format!(
            "{header}\n{r}\n{r}\n",
            r = r#"{"scan_id":"1","landmark_id":0,"rater_id":"a","x":1,"y":1,"space_id":"s"}"#
        );
        assert!(matches!(read_corpus(dup.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let bad_landmark = format!(
            "{header}\n{}\n",
            r#"{"scan_id":"1","landmark_id":7,"rater_id":"a","x":1,"y":1,"space_id":"s"}"#
        );
        assert!(read_corpus(bad_landmark.as_bytes()).is_err());
        assert!(matches!(read_corpus("".as_bytes()), Err(Error::EmptyFile)));
    }
}
