// Covariance ellipse of a rater cloud and its SVG rendering.
//
// ```bash
// cargo run --example covariance_ellipse_plot -- ellipse.svg
// ```

use landmark_variability::geometry::{ellipse_params, summarize, PointCloud};
use landmark_variability::plot::{render_cloud_svg, PlotOptions};
use landmark_variability::synthetic::{gaussian_cloud, rotated_covariance};
use landmark_variability::Result;

pub fn run() -> Result<String> {
    let truth_deg = 30.0f64;
    let cov = rotated_covariance([1.2, 0.4], truth_deg.to_radians());
    let cloud = PointCloud::from_xy(gaussian_cloud(8, 40, [101.5, 88.0], cov)?)?;

    let summary = summarize(&cloud)?;
    println!("covariance {:?}", summary.covariance);
    println!("eigenvalues {:?}", summary.eigenvalues);
    let ellipse = ellipse_params(&summary, 2.0)?;
    println!(
        "2-sigma ellipse: semi-axes {:.3} / {:.3} mm, orientation {:.1} deg (generator {truth_deg} deg)",
        ellipse.semi_axes[0],
        ellipse.semi_axes[1],
        ellipse.orientation().to_degrees()
    );

    let plot = render_cloud_svg("synthetic rater cloud", &cloud, &PlotOptions::default())?;
    Ok(plot.svg)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let svg = run()?;
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, svg)?,
        None => println!("{} bytes of SVG (pass a path to save it)", svg.len()),
    }
    Ok(())
}
