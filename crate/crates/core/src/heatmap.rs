//! Gaussian target heatmaps, argmax decoding, and the peak-value
//! pseudo-confidence consumed by WCVar.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::annotation::{CoordinateSpace, LandmarkPoint};
use crate::error::{Error, Result};

/// Default target width in pixels of the 640×800 grid.
pub const DEFAULT_SIGMA_PX: f64 = 3.0;

/// Row-major `height × width` grid of non-negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    space: Arc<CoordinateSpace>,
}

impl Heatmap {
    pub fn new(values: Vec<f64>, space: Arc<CoordinateSpace>) -> Result<Self> {
        let (width, height) = (space.width_px as usize, space.height_px as usize);
        if values.len() != width * height {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: width * height,
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidData(format!(
                "heatmap value {v} is negative or non-finite"
            )));
        }
        Ok(Heatmap {
            width,
            height,
            values,
            space,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> &Arc<CoordinateSpace> {
        &self.space
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multiplies every cell by `factor` (must be non-negative).
    pub fn scaled(&self, factor: f64) -> Result<Heatmap> {
        Heatmap::new(self.values.iter().map(|v| v * factor).collect(), self.space.clone())
    }
}

/// Unnormalized isotropic Gaussian with peak 1 at `center`.
pub fn render_gaussian(center: &LandmarkPoint, sigma_px: f64, space: &Arc<CoordinateSpace>) -> Result<Heatmap> {
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma_px}"
        )));
    }
    let center = center.convert_space(space);
    let (width, height) = (space.width_px as usize, space.height_px as usize);
    let denom = 2.0 * sigma_px * sigma_px;
    // exp(-(dx² + dy²)/2σ²) factors into a column term times a row term.
    let gx: Vec<f64> = (0..width)
        .map(|c| (-(c as f64 - center.x).powi(2) / denom).exp())
        .collect();
    let gy: Vec<f64> = (0..height)
        .map(|r| (-(r as f64 - center.y).powi(2) / denom).exp())
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for wy in &gy {
        values.extend(gx.iter().map(|wx| wy * wx));
    }
    Ok(Heatmap {
        width,
        height,
        values,
        space: space.clone(),
    })
}

/// Location and value of the maximal cell; ties go to the smallest row, then column.
pub fn decode_argmax(h: &Heatmap) -> Result<(LandmarkPoint, f64)> {
    if h.values.is_empty() {
        return Err(Error::Empty("heatmap"));
    }
    let mut best = 0;
    for (i, v) in h.values.iter().enumerate() {
        if *v > h.values[best] {
            best = i;
        }
    }
    let (row, col) = (best / h.width, best % h.width);
    let point = LandmarkPoint {
        x: col as f64,
        y: row as f64,
        space: h.space.clone(),
    };
    Ok((point, h.values[best]))
}

pub fn pseudo_confidence(h: &Heatmap) -> Result<f64> {
    decode_argmax(h).map(|(_, v)| v)
}

/// Writes `height`, `width` as little-endian u32 followed by row-major little-endian f32 values.
pub fn write_heatmap<W: Write>(mut out: W, h: &Heatmap) -> Result<()> {
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::InvalidData("heatmap too large".into()));
    out.write_all(&dim(h.height)?.to_le_bytes())?;
    out.write_all(&dim(h.width)?.to_le_bytes())?;
    for v in &h.values {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads the dump written by [`write_heatmap`]; dimensions must match `space`.
pub fn read_heatmap<R: Read>(mut input: R, space: &Arc<CoordinateSpace>) -> Result<Heatmap> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let height = u32::from_le_bytes(word);
    input.read_exact(&mut word)?;
    let width = u32::from_le_bytes(word);
    if (width, height) != (space.width_px, space.height_px) {
        return Err(Error::InvalidData(format!(
            "heatmap is {height}x{width}, space {} is {}x{}",
            space.space_id, space.height_px, space.width_px
        )));
    }
    let mut bytes = vec![0u8; width as usize * height as usize * 4];
    input.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Heatmap::new(values, space.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: u32, h: u32) -> Arc<CoordinateSpace> {
        Arc::new(CoordinateSpace::new("grid", w, h, 0.3, 0.3).unwrap())
    }

    fn at(x: f64, y: f64, s: &Arc<CoordinateSpace>) -> LandmarkPoint {
        LandmarkPoint::new(x, y, s.clone()).unwrap()
    }

    #[test]
    fn render_values() {
        let s = grid(11, 11);
        let h = render_gaussian(&at(5.0, 5.0, &s), 1.0, &s).unwrap();
        assert_eq!(h.get(5, 5), 1.0);
        assert!((h.get(5, 6) - (-0.5f64).exp()).abs() < 1e-15);
        assert!(render_gaussian(&at(5.0, 5.0, &s), 0.0, &s).is_err());
    }

    #[test]
    fn far_center_decays_below_border() {
        let s = grid(20, 20);
        let h = render_gaussian(&at(60.0, 10.0, &s), 2.0, &s).unwrap();
        let border = (-(60.0f64 - 19.0).powi(2) / 8.0).exp();
        assert!(h.values().iter().all(|v| *v <= border));
    }

    #[test]
    fn gaussian_mass_matches_integral() {
        let s = grid(64, 64);
        let h = render_gaussian(&at(32.0, 32.0, &s), 2.0, &s).unwrap();
        let sum: f64 = h.values().iter().sum();
        let expected = 2.0 * std::f64::consts::PI * 4.0;
        assert!((sum - expected).abs() / expected < 0.01);
    }

    #[test]
    fn decode_examples() {
        let s = grid(64, 32);
        let h = render_gaussian(&at(37.0, 12.0, &s), 2.0, &s).unwrap();
        let (p, v) = decode_argmax(&h).unwrap();
        assert_eq!((p.x, p.y, v), (37.0, 12.0, 1.0));
        let h = render_gaussian(&at(37.4, 12.6, &s), 2.0, &s).unwrap();
        let (p, _) = decode_argmax(&h).unwrap();
        assert_eq!((p.x, p.y), (37.0, 13.0));
        let flat = Heatmap::new(vec![0.5; 64 * 32], s.clone()).unwrap();
        let (p, v) = decode_argmax(&flat).unwrap();
        assert_eq!((p.x, p.y, v), (0.0, 0.0, 0.5));
    }

    #[test]
    fn pseudo_confidence_examples() {
        let s = grid(30, 30);
        let h = render_gaussian(&at(10.0, 20.0, &s), 3.0, &s).unwrap();
        assert_eq!(pseudo_confidence(&h).unwrap(), 1.0);
        assert!((pseudo_confidence(&h.scaled(0.3).unwrap()).unwrap() - 0.3).abs() < 1e-15);
        let zero = Heatmap::new(vec![0.0; 900], s).unwrap();
        assert_eq!(pseudo_confidence(&zero).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        let s = grid(3, 2);
        assert!(Heatmap::new(vec![0.0; 5], s.clone()).is_err());
        assert!(Heatmap::new(vec![0.0, 0.0, -1.0, 0.0, 0.0, 0.0], s).is_err());
    }

    #[test]
    fn binary_dump_layout_and_round_trip() {
        let s = grid(3, 2);
        let h = Heatmap::new(vec![0.0, 0.5, 1.0, 0.25, 0.125, 2.0], s.clone()).unwrap();
        let mut buf = Vec::new();
        write_heatmap(&mut buf, &h).unwrap();
        assert_eq!(buf.len(), 8 + 6 * 4);
        assert_eq!(&buf[..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&buf[12..16], &0.5f32.to_le_bytes());
        assert_eq!(read_heatmap(buf.as_slice(), &s).unwrap(), h);
        assert!(read_heatmap(buf.as_slice(), &grid(2, 3)).is_err());
    }
}
