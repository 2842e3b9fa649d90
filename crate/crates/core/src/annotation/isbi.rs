use std::io::Write;
use std::sync::Arc;

use super::{CoordinateSpace, LandmarkPoint};
use crate::error::{Error, Result};

/// Parses an ISBI-2015-style annotation file: leading `x,y` lines, one per
/// landmark, optionally followed by lines without a comma (the dataset's
/// classification trailer) which are ignored.
///
/// A line containing a comma must hold exactly two decimals. The coordinate
/// block ends at the first comma-free line after at least one coordinate.
pub fn parse_isbi_annotation_file(text: &[u8], space: &Arc<CoordinateSpace>) -> Result<Vec<LandmarkPoint>> {
    let text = std::str::from_utf8(text).map_err(|e| Error::parse(0, format!("invalid UTF-8: {e}")))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if !line.contains(',') {
            if points.is_empty() {
                return Err(Error::parse(line_no, format!("expected \"x,y\", found {line:?}")));
            }
            break;
        }
        let mut parts = line.split(',');
        let (Some(xs), Some(ys), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(line_no, format!("expected two values, found {line:?}")));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line_no, format!("not a decimal: {:?}", s.trim())))
        };
        points.push(LandmarkPoint {
            x: parse(xs)?,
            y: parse(ys)?,
            space: Arc::clone(space),
        });
    }
    Ok(points)
}

/// Writes points in the same `x,y` line format.
pub fn write_isbi_annotation_file<W: Write>(mut out: W, points: &[LandmarkPoint]) -> Result<()> {
    for p in points {
        writeln!(out, "{},{}", p.x, p.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> Arc<CoordinateSpace> {
        Arc::new(CoordinateSpace::isbi_original())
    }

    #[test]
    fn parses_pairs_in_order() {
        let pts = parse_isbi_annotation_file(b"100.5,200.25\n300,400\n", &space()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].x, pts[0].y), (100.5, 200.25));
        assert_eq!((pts[1].x, pts[1].y), (300.0, 400.0));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            parse_isbi_annotation_file(b"", &space()),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            parse_isbi_annotation_file(b"\n  \n", &space()),
            Err(Error::EmptyFile)
        ));
    }

    #[test]
    fn nineteen_landmarks_with_trailer() {
        let mut text = String::new();
        for i in 0..19 {
            text.push_str(&format!("{},{}\r\n", 800 + i * 3, 1000 + i * 7));
        }
        text.push_str("1\n2\n3\n1\n");
        let pts = parse_isbi_annotation_file(text.as_bytes(), &space()).unwrap();
        assert_eq!(pts.len(), 19);
        assert_eq!((pts[0].x, pts[0].y), (800.0, 1000.0));
        assert_eq!((pts[18].x, pts[18].y), (854.0, 1126.0));
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let cases: [(&[u8], usize); 4] = [
            (b"1,2\n3,x\n", 2),
            (b"1,2\n3,4,5\n", 2),
            (b"abc\n1,2\n", 1),
            (b"1,2\n2,3\n,4\n", 3),
        ];
        for (text, line) in cases {
            match parse_isbi_annotation_file(text, &space()) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn write_then_parse_is_identity() {
        let pts = parse_isbi_annotation_file(b"0.1,2.5e2\n-3.75,4\n", &space()).unwrap();
        let mut buf = Vec::new();
        write_isbi_annotation_file(&mut buf, &pts).unwrap();
        assert_eq!(parse_isbi_annotation_file(&buf, &space()).unwrap(), pts);
    }
}
