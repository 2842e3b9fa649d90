//! Inter-rater variability, predictive uncertainty and their agreement for
//! anatomical landmark detection.
//!
//! The crate covers the whole pipeline:
//!
//! - [`annotation`]: coordinate spaces, rater annotations, prediction samples and their file formats
//! - [`geometry`]: point clouds, covariance eigen-decomposition and confidence ellipses
//! - [`metrics`]: CVar, PSV, anisotropy and heatmap-weighted WCVar
//! - [`fusion`]: label averaging, random rater sampling and deep-ensemble aggregation
//! - [`heatmap`]: Gaussian target rendering and argmax decoding
//! - [`evaluation`]: MRE/SDR, cross-validation folds and binned Pearson correlation
//! - [`synthetic`]: seeded multi-rater corpora with known spread
//! - [`report`], [`plot`], [`config`], [`commands`]: batch analysis and outputs
//!
//! ```
//! use landmark_variability::geometry::PointCloud;
//! use landmark_variability::metrics::{cvar, psv};
//!
//! let cloud = PointCloud::from_xy([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]).unwrap();
//! assert!((cvar(&cloud) - 2f64.sqrt()).abs() < 1e-12);
//! assert!((psv(&cloud).unwrap() - 1.0).abs() < 1e-12);
//! ```

pub mod annotation;
pub mod commands;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod synthetic;

pub use annotation::{
    AnnotationSet, CoordinateSpace, Corpus, LandmarkKey, LandmarkPoint, Provenance, Sample, SampleCorpus, SampleSet,
};
pub use error::{Error, Result};
pub use fusion::FusionStrategy;
pub use geometry::PointCloud;
pub use metrics::{LandmarkMetrics, MetricConfig};
