//! Run configuration: a flat TOML document whose keys mirror the CLI flags.
//!
//! ```toml
//! corpus = "corpus.jsonl"
//! out = "results"
//! seed = 7
//! folds = 4
//! bin_size = 5
//! thresholds = [2.0, 2.5, 3.0, 4.0]
//! space = "isbi_640x800"
//!
//! [strategies]
//! averaging = "samples_averaging.jsonl"
//! deep_ensembles = "samples_deep_ensembles.jsonl"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::CoordinateSpace;
use crate::error::{Error, Result};
use crate::evaluation::SdrThresholds;
use crate::fusion::FusionStrategy;
use crate::metrics::MetricConfig;
use crate::report::{AnalysisConfig, GroundTruth};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub bin_size: Option<usize>,
    pub bin_order: Option<String>,
    pub thresholds: Option<Vec<f64>>,
    /// Sets both epsilons unless they are given individually.
    pub epsilon: Option<f64>,
    pub epsilon_aniso: Option<f64>,
    pub epsilon_wcvar: Option<f64>,
    /// Default space for sample files and ISBI imports.
    pub space: Option<String>,
    pub canonical_space: Option<String>,
    /// `silver_mean` or `rater:<id>`.
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub strategies: BTreeMap<String, PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpus.as_mut().map(resolve);
        cfg.out.as_mut().map(resolve);
        cfg.strategies.values_mut().for_each(resolve);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fields set in `overrides` win.
    pub fn merge(self, overrides: RunConfig) -> RunConfig {
        RunConfig {
            corpus: overrides.corpus.or(self.corpus),
            out: overrides.out.or(self.out),
            seed: overrides.seed.or(self.seed),
            folds: overrides.folds.or(self.folds),
            bin_size: overrides.bin_size.or(self.bin_size),
            bin_order: overrides.bin_order.or(self.bin_order),
            thresholds: overrides.thresholds.or(self.thresholds),
            epsilon: overrides.epsilon.or(self.epsilon),
            epsilon_aniso: overrides.epsilon_aniso.or(self.epsilon_aniso),
            epsilon_wcvar: overrides.epsilon_wcvar.or(self.epsilon_wcvar),
            space: overrides.space.or(self.space),
            canonical_space: overrides.canonical_space.or(self.canonical_space),
            ground_truth: overrides.ground_truth.or(self.ground_truth),
            strategies: if overrides.strategies.is_empty() {
                self.strategies
            } else {
                overrides.strategies
            },
        }
    }

    pub fn analysis(&self) -> Result<AnalysisConfig> {
        let defaults = AnalysisConfig::default();
        let eps = |specific: Option<f64>, default: f64| specific.or(self.epsilon).unwrap_or(default);
        let cfg = AnalysisConfig {
            seed: self.seed.unwrap_or(defaults.seed),
            n_folds: self.folds.unwrap_or(defaults.n_folds),
            bin_size: self.bin_size.unwrap_or(defaults.bin_size),
            bin_order: self
                .bin_order
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
            thresholds: match &self.thresholds {
                Some(t) => SdrThresholds::new(t.clone())?,
                None => defaults.thresholds,
            },
            metrics: MetricConfig::new(
                eps(self.epsilon_aniso, defaults.metrics.epsilon_aniso),
                eps(self.epsilon_wcvar, defaults.metrics.epsilon_wcvar),
            )?,
            canonical_space: match &self.canonical_space {
                Some(s) => parse_space(s)?,
                None => defaults.canonical_space,
            },
            ground_truth: match self.ground_truth.as_deref() {
                None | Some("silver_mean") => GroundTruth::SilverMean,
                Some(s) => match s.strip_prefix("rater:") {
                    Some(r) if !r.is_empty() => GroundTruth::Rater(r.to_string()),
                    _ => return Err(Error::InvalidParameter(format!("unknown ground truth {s:?}"))),
                },
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sample_space(&self) -> Result<Option<CoordinateSpace>> {
        self.space.as_deref().map(parse_space).transpose()
    }

    /// Strategy sample files, in canonical strategy order.
    pub fn strategy_paths(&self) -> Result<Vec<(FusionStrategy, PathBuf)>> {
        let mut out = self
            .strategies
            .iter()
            .map(|(name, path)| Ok((name.parse::<FusionStrategy>()?, path.clone())))
            .collect::<Result<Vec<_>>>()?;
        out.sort_by_key(|(s, _)| *s);
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("strategy given more than once".into()));
        }
        Ok(out)
    }
}

/// Parses a preset (`isbi_1935x2400`/`original`, `isbi_640x800`/`downsampled`)
/// or a custom `id:WIDTHxHEIGHT@MMX,MMY` space.
pub fn parse_space(s: &str) -> Result<CoordinateSpace> {
    match s.trim() {
        "original" | "isbi_1935x2400" => return Ok(CoordinateSpace::isbi_original()),
        "downsampled" | "isbi_640x800" => return Ok(CoordinateSpace::isbi_downsampled()),
        _ => {}
    }
    let bad = || Error::InvalidParameter(format!("space {s:?}: expected a preset or id:WxH@MMX,MMY"));
    let (id, rest) = s.split_once(':').ok_or_else(bad)?;
    let (dims, scale) = rest.split_once('@').ok_or_else(bad)?;
    let (w, h) = dims.split_once('x').ok_or_else(bad)?;
    let (sx, sy) = scale.split_once(',').ok_or_else(bad)?;
    CoordinateSpace::new(
        id.trim(),
        w.trim().parse().map_err(|_| bad())?,
        h.trim().parse().map_err(|_| bad())?,
        sx.trim().parse().map_err(|_| bad())?,
        sy.trim().parse().map_err(|_| bad())?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::BinOrder;

    #[test]
    fn parses_and_merges() {
        let file = RunConfig::from_toml_str(
            r#"
seed = 9
folds = 5
thresholds = [1.0, 2.0]
epsilon = 1e-4
bin_order = "sorted"
ground_truth = "rater:senior"

[strategies]
averaging = "a.jsonl"
deep-ensembles = "e.jsonl"
"#,
        )
        .unwrap();
        let flags = RunConfig {
            seed: Some(3),
            epsilon_wcvar: Some(1e-3),
            ..Default::default()
        };
        let merged = file.merge(flags);
        let cfg = merged.analysis().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.n_folds, 5);
        assert_eq!(cfg.thresholds.as_slice(), &[1.0, 2.0]);
        assert_eq!(cfg.metrics.epsilon_aniso, 1e-4);
        assert_eq!(cfg.metrics.epsilon_wcvar, 1e-3);
        assert_eq!(cfg.bin_order, BinOrder::SortedByReference);
        assert_eq!(cfg.ground_truth, GroundTruth::Rater("senior".into()));
        let strategies = merged.strategy_paths().unwrap();
        assert_eq!(strategies[0].0, FusionStrategy::Averaging);
        assert_eq!(strategies[1].0, FusionStrategy::DeepEnsembles);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_toml_str("sed = 1"), Err(Error::Config(_))));
        let cfg = RunConfig {
            thresholds: Some(vec![3.0, 2.0]),
            ..Default::default()
        };
        assert!(cfg.analysis().is_err());
        let cfg = RunConfig {
            ground_truth: Some("rater:".into()),
            ..Default::default()
        };
        assert!(cfg.analysis().is_err());
    }

    #[test]
    fn space_strings() {
        assert_eq!(parse_space("downsampled").unwrap(), CoordinateSpace::isbi_downsampled());
        let s = parse_space("crop:512x256@0.2,0.25").unwrap();
        assert_eq!(
            (s.space_id.as_str(), s.width_px, s.height_px, s.mm_per_px_y),
            ("crop", 512, 256, 0.25)
        );
        assert!(parse_space("crop:512x256").is_err());
        assert!(parse_space("crop:0x256@0.1,0.1").is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig {
            corpus: Some("corpus.jsonl".into()),
            seed: Some(4),
            ..Default::default()
        };
        cfg.strategies.insert("random_sampling".into(), "rs.jsonl".into());
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
