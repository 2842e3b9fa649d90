// Gaussian heatmap targets, argmax decoding and pseudo-confidence.
//
// ```bash
// cargo run --example heatmap_decoding
// ```

use std::sync::Arc;

use landmark_variability::annotation::{CoordinateSpace, LandmarkPoint};
use landmark_variability::heatmap::{
    decode_argmax, pseudo_confidence, read_heatmap, render_gaussian, write_heatmap, DEFAULT_SIGMA_PX,
};
use landmark_variability::Result;

pub fn run() -> Result<(f64, f64)> {
    let grid = Arc::new(CoordinateSpace::isbi_downsampled());
    // A landmark recorded on the original grid lands between downsampled pixels.
    let original = Arc::new(CoordinateSpace::isbi_original());
    let target = LandmarkPoint::new(1033.0, 1190.0, original)?;

    let heatmap = render_gaussian(&target, DEFAULT_SIGMA_PX, &grid)?;
    let (peak, value) = decode_argmax(&heatmap)?;
    let expected = target.convert_space(&grid);
    println!(
        "target ({:.2}, {:.2}) px on {}, decoded ({}, {}), peak {:.4}",
        expected.x, expected.y, grid.space_id, peak.x, peak.y, value
    );

    // A blurred, damped map keeps its argmax but reports lower confidence.
    let damped = heatmap.scaled(0.35)?;
    println!(
        "pseudo-confidence {:.4} -> {:.4}",
        pseudo_confidence(&heatmap)?,
        pseudo_confidence(&damped)?
    );

    let mut bytes = Vec::new();
    write_heatmap(&mut bytes, &damped)?;
    let back = read_heatmap(bytes.as_slice(), &grid)?;
    println!(
        "binary dump: {} bytes, {}x{} cells",
        bytes.len(),
        back.height(),
        back.width()
    );

    let mm = peak.to_mm();
    println!("decoded position {:.2} mm, {:.2} mm", mm.0, mm.1);
    Ok((peak.x - expected.x, peak.y - expected.y))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
