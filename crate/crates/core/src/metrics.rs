//! Variability and uncertainty metrics over a point cloud in millimetres.
//!
//! The same four numbers describe inter-rater variability (cloud = all raters'
//! annotations) and model uncertainty (cloud = MC-dropout or ensemble
//! samples):
//!
//! * **CVar**: mean distance of the points to their centroid.
//! * **PSV**: square root of the largest covariance eigenvalue.
//! * **Anisotropy**: `√λ_max / (√λ_min + ε)`.
//! * **WCVar**: CVar with each point weighted by the normalized inverse of its
//!   heatmap peak, `(1/(h_i+ε)) / Σ_j 1/(h_j+ε)`. Without heatmap values all
//!   weights are equal and WCVar equals CVar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{summarize, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub epsilon_aniso: f64,
    pub epsilon_wcvar: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            epsilon_aniso: 1e-6,
            epsilon_wcvar: 1e-6,
        }
    }
}

impl MetricConfig {
    pub fn new(epsilon_aniso: f64, epsilon_wcvar: f64) -> Result<Self> {
        let cfg = MetricConfig {
            epsilon_aniso,
            epsilon_wcvar,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [
            ("epsilon_aniso", self.epsilon_aniso),
            ("epsilon_wcvar", self.epsilon_wcvar),
        ] {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {eps}")));
            }
        }
        Ok(())
    }
}

/// All four metrics for one landmark.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkMetrics {
    pub cvar_mm: f64,
    pub psv_mm: f64,
    pub anisotropy: f64,
    pub wcvar_mm: f64,
}

impl LandmarkMetrics {
    pub fn compute(cloud: &PointCloud, heatmap_max: Option<&[f64]>, cfg: &MetricConfig) -> Result<Self> {
        let summary = summarize(cloud)?;
        let psv = summary.max_eigenvalue().sqrt();
        Ok(LandmarkMetrics {
            cvar_mm: cvar(cloud),
            psv_mm: psv,
            anisotropy: psv / (summary.min_eigenvalue().sqrt() + cfg.epsilon_aniso),
            wcvar_mm: wcvar(cloud, heatmap_max, cfg)?,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Cvar => self.cvar_mm,
            Metric::Psv => self.psv_mm,
            Metric::Anisotropy => self.anisotropy,
            Metric::Wcvar => self.wcvar_mm,
        }
    }

    /// Arithmetic mean over landmarks; `None` for an empty input.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a LandmarkMetrics>) -> Option<LandmarkMetrics> {
        let mut acc = LandmarkMetrics::default();
        let mut n = 0usize;
        for m in items {
            acc.cvar_mm += m.cvar_mm;
            acc.psv_mm += m.psv_mm;
            acc.anisotropy += m.anisotropy;
            acc.wcvar_mm += m.wcvar_mm;
            n += 1;
        }
        (n > 0).then(|| {
            let n = n as f64;
            LandmarkMetrics {
                cvar_mm: acc.cvar_mm / n,
                psv_mm: acc.psv_mm / n,
                anisotropy: acc.anisotropy / n,
                wcvar_mm: acc.wcvar_mm / n,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cvar,
    Psv,
    Anisotropy,
    Wcvar,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Cvar, Metric::Psv, Metric::Anisotropy, Metric::Wcvar];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cvar => "cvar",
            Metric::Psv => "psv",
            Metric::Anisotropy => "anisotropy",
            Metric::Wcvar => "wcvar",
        }
    }
}

pub fn cvar(cloud: &PointCloud) -> f64 {
    let dev = cloud.deviations();
    dev.iter().sum::<f64>() / dev.len() as f64
}

pub fn psv(cloud: &PointCloud) -> Result<f64> {
    Ok(summarize(cloud)?.max_eigenvalue().sqrt())
}

pub fn anisotropy(cloud: &PointCloud, cfg: &MetricConfig) -> Result<f64> {
    let s = summarize(cloud)?;
    Ok(s.max_eigenvalue().sqrt() / (s.min_eigenvalue().sqrt() + cfg.epsilon_aniso))
}

/// Normalized inverse-peak weights; uniform when `heatmap_max` is `None`.
pub fn wcvar_weights(n: usize, heatmap_max: Option<&[f64]>, cfg: &MetricConfig) -> Result<Vec<f64>> {
    let Some(h) = heatmap_max else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if h.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: h.len(),
        });
    }
    if let Some(&bad) = h.iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeHeatmap(bad));
    }
    let inv: Vec<f64> = h.iter().map(|v| 1.0 / (v + cfg.epsilon_wcvar)).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

/// Weighted mean distance to the unweighted centroid.
pub fn wcvar(cloud: &PointCloud, heatmap_max: Option<&[f64]>, cfg: &MetricConfig) -> Result<f64> {
    let dev = cloud.deviations();
    if heatmap_max.is_none() {
        return Ok(dev.iter().sum::<f64>() / dev.len() as f64);
    }
    let weights = wcvar_weights(dev.len(), heatmap_max, cfg)?;
    Ok(weights.iter().zip(&dev).map(|(w, d)| w * d).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_xy(pts.iter().copied()).unwrap()
    }

    #[test]
    fn cvar_examples() {
        assert_eq!(cvar(&cloud(&[[0.0, 0.0], [2.0, 0.0]])), 1.0);
        assert_eq!(cvar(&cloud(&[[5.0, 5.0]])), 0.0);
        // Centroid (1, 4/3); distances √(1+16/9), √(1+64/9), √(4+16/9).
        let expected = ((25.0f64 / 9.0).sqrt() + (73.0f64 / 9.0).sqrt() + (52.0f64 / 9.0).sqrt()) / 3.0;
        let got = cvar(&cloud(&[[0.0, 0.0], [0.0, 4.0], [3.0, 0.0]]));
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 2.306_12).abs() < 1e-4);
    }

    #[test]
    fn psv_and_anisotropy_examples() {
        let pair = cloud(&[[-1.0, 0.0], [1.0, 0.0]]);
        let cfg = MetricConfig::default();
        assert_eq!(psv(&pair).unwrap(), 1.0);
        assert!((anisotropy(&pair, &cfg).unwrap() - 1e6).abs() < 1e-6);
        let single = cloud(&[[3.0, 4.0]]);
        assert_eq!(psv(&single).unwrap(), 0.0);
        assert_eq!(anisotropy(&single, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn wcvar_equal_confidence_matches_cvar() {
        let c = cloud(&[[0.0, 0.0], [0.0, 4.0], [3.0, 0.0]]);
        let cfg = MetricConfig::default();
        assert!((wcvar(&c, Some(&[0.7, 0.7, 0.7]), &cfg).unwrap() - cvar(&c)).abs() < 1e-12 * cvar(&c));
        assert_eq!(wcvar(&c, None, &cfg).unwrap(), cvar(&c));
        assert_eq!(wcvar(&cloud(&[[1.0, 1.0]]), Some(&[0.2]), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn wcvar_two_sample_weights() {
        let cfg = MetricConfig::default();
        let eps = cfg.epsilon_wcvar;
        let w = wcvar_weights(2, Some(&[1.0, 0.25]), &cfg).unwrap();
        let (a, b) = (1.0 / (1.0 + eps), 1.0 / (0.25 + eps));
        assert!((w[0] - a / (a + b)).abs() < 1e-15);
        assert!((w[0] - 0.2).abs() < 1e-6 && (w[1] - 0.8).abs() < 1e-6);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Equal distances to the centroid, so weights do not matter.
        let v = wcvar(&cloud(&[[0.0, 0.0], [2.0, 0.0]]), Some(&[1.0, 0.25]), &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = wcvar(&cloud(&[[0.0, 0.0], [4.0, 0.0]]), Some(&[1.0, 0.25]), &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn wcvar_weights_favour_low_confidence_samples() {
        let cfg = MetricConfig::default();
        // Centroid at (1, 0); the far sample at (3, 0) has distance 2.
        let c = cloud(&[[0.0, 0.0], [0.0, 0.0], [3.0, 0.0]]);
        let low_far = wcvar(&c, Some(&[1.0, 1.0, 0.1]), &cfg).unwrap();
        let high_far = wcvar(&c, Some(&[0.1, 0.1, 1.0]), &cfg).unwrap();
        assert!(low_far > cvar(&c) && high_far < cvar(&c));
    }

    #[test]
    fn wcvar_errors() {
        let c = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let cfg = MetricConfig::default();
        assert!(matches!(
            wcvar(&c, Some(&[1.0, -0.5]), &cfg),
            Err(Error::NegativeHeatmap(_))
        ));
        assert!(matches!(
            wcvar(&c, Some(&[1.0]), &cfg),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn all_zero_heatmaps_stay_finite() {
        let c = cloud(&[[0.0, 0.0], [2.0, 0.0]]);
        let v = wcvar(&c, Some(&[0.0, 0.0]), &MetricConfig::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::new(0.0, 1e-6).is_err());
        assert!(MetricConfig::new(1e-6, f64::NAN).is_err());
        assert!(MetricConfig::new(1e-3, 1e-3).is_ok());
    }

    #[test]
    fn mean_over_landmarks() {
        let a = LandmarkMetrics {
            cvar_mm: 1.0,
            psv_mm: 2.0,
            anisotropy: 3.0,
            wcvar_mm: 4.0,
        };
        let b = LandmarkMetrics {
            cvar_mm: 3.0,
            psv_mm: 2.0,
            anisotropy: 1.0,
            wcvar_mm: 0.0,
        };
        let m = LandmarkMetrics::mean([&a, &b]).unwrap();
        assert_eq!((m.cvar_mm, m.psv_mm, m.anisotropy, m.wcvar_mm), (2.0, 2.0, 2.0, 2.0));
        assert!(LandmarkMetrics::mean([]).is_none());
    }
}
