// Inter-rater variability of one landmark annotated by eleven raters.
//
// Half of the raters worked on the full-resolution grid and half on the
// 640x800 downsampled copy; both are mapped into millimetres on the original
// grid before any metric is computed.
//
// ```bash
// cargo run --example inter_rater_variability
// ```

use std::sync::Arc;

use landmark_variability::annotation::{AnnotationSet, CoordinateSpace, LandmarkKey, LandmarkPoint};
use landmark_variability::metrics::{wcvar_weights, LandmarkMetrics, MetricConfig};
use landmark_variability::Result;

pub fn run() -> Result<LandmarkMetrics> {
    let original = Arc::new(CoordinateSpace::isbi_original());
    let small = Arc::new(CoordinateSpace::isbi_downsampled());

    // Sella turcica picks in original pixels, elongated along x.
    let picks = [
        (812.0, 1021.0),
        (836.0, 1018.0),
        (790.0, 1025.0),
        (821.0, 1030.0),
        (804.0, 1012.0),
        (845.0, 1027.0),
        (798.0, 1019.0),
        (829.0, 1024.0),
        (815.0, 1016.0),
        (808.0, 1029.0),
        (840.0, 1021.0),
    ];
    let mut raters = Vec::new();
    for (i, (x, y)) in picks.into_iter().enumerate() {
        let point = LandmarkPoint::new(x, y, original.clone())?;
        let point = if i % 2 == 1 { point.convert_space(&small) } else { point };
        raters.push((format!("rater_{i:02}"), point));
    }
    // A set must share one space, so bring everything onto the original grid.
    let raters = raters
        .into_iter()
        .map(|(id, p)| (id, p.convert_space(&original)))
        .collect();
    let set = AnnotationSet::new(LandmarkKey::new("001", 0), raters)?;

    let cfg = MetricConfig::default();
    let cloud = set.cloud_mm(&original);
    let metrics = LandmarkMetrics::compute(&cloud, None, &cfg)?;
    println!("landmark {} with {} raters", set.key(), set.n_raters());
    println!("  CVar       {:.4} mm", metrics.cvar_mm);
    println!("  PSV        {:.4} mm", metrics.psv_mm);
    println!("  anisotropy {:.4}", metrics.anisotropy);
    println!(
        "  WCVar      {:.4} mm (equal weights without heatmaps)",
        metrics.wcvar_mm
    );

    // With heatmap peaks, low-confidence samples get larger weights.
    let peaks = [0.9, 0.8, 0.3, 0.85, 0.7, 0.2, 0.75, 0.9, 0.95, 0.6, 0.4];
    let weighted = LandmarkMetrics::compute(&cloud, Some(&peaks), &cfg)?;
    let w = wcvar_weights(peaks.len(), Some(&peaks), &cfg)?;
    println!(
        "  WCVar with peaks {:.4} mm; weight of the 0.2 peak {:.3}",
        weighted.wcvar_mm, w[5]
    );
    Ok(metrics)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
