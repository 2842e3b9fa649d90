// Detection accuracy and uncertainty-error agreement on a small held-out split.
//
// ```bash
// cargo run --example evaluation_protocol
// ```

use std::sync::Arc;

use landmark_variability::annotation::{CoordinateSpace, LandmarkPoint};
use landmark_variability::evaluation::{
    binned_series, make_folds, mre, pearson, radial_errors, sdr, BinOrder, SdrThresholds,
};
use landmark_variability::Result;

pub fn run() -> Result<Vec<f64>> {
    let space = Arc::new(CoordinateSpace::isbi_original());
    let scans: Vec<String> = (1..=12).map(|i| format!("{i:03}")).collect();
    let folds = make_folds(&scans, 4, 2024)?;
    println!(
        "fold sizes {:?}; fold 0 tests on {:?}",
        folds.fold_sizes(),
        folds.test_scans(0)
    );

    // Predictions off by a growing amount, in pixels (0.1 mm each).
    let offsets = [3.0, 8.0, 12.0, 15.0, 19.0, 22.0, 26.0, 31.0, 38.0, 45.0, 52.0, 70.0];
    let truth: Vec<LandmarkPoint> = (0..offsets.len())
        .map(|i| LandmarkPoint::new(500.0 + i as f64, 900.0, space.clone()))
        .collect::<Result<_>>()?;
    let predicted: Vec<LandmarkPoint> = truth
        .iter()
        .zip(offsets)
        .map(|(t, d)| LandmarkPoint::new(t.x + 0.6 * d, t.y - 0.8 * d, space.clone()))
        .collect::<Result<_>>()?;

    let thresholds = SdrThresholds::default();
    let rates = sdr(&predicted, &truth, &thresholds)?;
    println!("MRE {:.3} mm", mre(&predicted, &truth)?);
    for (t, r) in thresholds.as_slice().iter().zip(&rates) {
        println!("  SDR@{t} mm {r:.1} %");
    }

    // An uncertainty that tracks the error, plus noise.
    let errors = radial_errors(&predicted, &truth)?;
    let uncertainty: Vec<f64> = errors
        .iter()
        .enumerate()
        .map(|(i, e)| 0.5 * e + if i % 2 == 0 { 0.3 } else { -0.2 })
        .collect();
    for bin_size in [1, 3] {
        let series = binned_series(&uncertainty, &errors, bin_size, BinOrder::SortedByReference)?;
        println!(
            "pearson r with bin size {bin_size}: {:.4} over {} bins",
            pearson(&series)?,
            series.len()
        );
    }
    Ok(rates)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
