//! SVG scatter plots of annotation clouds with their covariance ellipse.
//!
//! Axes are in millimetres with image orientation (y grows downward) and a
//! shared scale on both axes, so ellipse angles are drawn faithfully.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::annotation::{AnnotationSet, CoordinateSpace};
use crate::error::Result;
use crate::geometry::{ellipse_params, summarize, Ellipse, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotOptions {
    pub k_sigma: f64,
    pub size_px: f64,
    pub margin_px: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            k_sigma: 2.0,
            size_px: 480.0,
            margin_px: 56.0,
        }
    }
}

/// A rendered plot plus the fitted ellipse, if one was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudPlot {
    pub svg: String,
    pub ellipse: Option<Ellipse>,
    pub warning: Option<String>,
}

pub fn plot_annotation_set(
    set: &AnnotationSet,
    canonical: &Arc<CoordinateSpace>,
    opts: &PlotOptions,
) -> Result<CloudPlot> {
    let title = format!(
        "scan {} / landmark {} ({} raters)",
        set.scan_id(),
        set.landmark_id(),
        set.n_raters()
    );
    render_cloud_svg(&title, &set.cloud_mm(canonical), opts)
}

pub fn render_cloud_svg(title: &str, cloud: &PointCloud, opts: &PlotOptions) -> Result<CloudPlot> {
    let pts: Vec<[f64; 2]> = cloud.points().map(|p| [p[0], p[1]]).collect();
    let (ellipse, warning) = if pts.len() < 2 {
        (None, Some(format!("{title}: fewer than 2 points, ellipse omitted")))
    } else {
        (Some(ellipse_params(&summarize(cloud)?, opts.k_sigma)?), None)
    };

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut include = |p: [f64; 2]| {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    };
    pts.iter().for_each(|p| include(*p));
    if let Some(e) = &ellipse {
        let r = e.semi_axes[0];
        include([e.center[0] - r, e.center[1] - r]);
        include([e.center[0] + r, e.center[1] + r]);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0) * 1.1;
    let origin = [0.5 * (lo[0] + hi[0]) - 0.5 * span, 0.5 * (lo[1] + hi[1]) - 0.5 * span];
    let plot = opts.size_px - 2.0 * opts.margin_px;
    let scale = plot / span;
    let sx = |x: f64| opts.margin_px + (x - origin[0]) * scale;
    let sy = |y: f64| opts.margin_px + (y - origin[1]) * scale;

    let mut svg = String::new();
    let size = opts.size_px;
    let m = opts.margin_px;
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.0} {size:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="20" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        size / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{m:.3}" y="{m:.3}" width="{plot:.3}" height="{plot:.3}" fill="none" stroke="#444" stroke-width="1"/>"##
    );
    let end = m + plot;
    let _ = writeln!(svg, r##"<g font-family="sans-serif" font-size="10" fill="#444">"##);
    let _ = writeln!(
        svg,
        r#"<text x="{m:.3}" y="{:.3}" text-anchor="start">{:.2}</text>"#,
        end + 14.0,
        origin[0]
    );
    let _ = writeln!(
        svg,
        r#"<text x="{end:.3}" y="{:.3}" text-anchor="end">{:.2}</text>"#,
        end + 14.0,
        origin[0] + span
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">x (mm)</text>"#,
        m + plot / 2.0,
        end + 30.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{:.2}</text>"#,
        m - 4.0,
        m + 4.0,
        origin[1]
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.3}" y="{end:.3}" text-anchor="end">{:.2}</text>"#,
        m - 4.0,
        origin[1] + span
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.3}" text-anchor="middle" transform="rotate(-90 14 {:.3})">y (mm)</text>"#,
        m + plot / 2.0,
        m + plot / 2.0
    );
    let _ = writeln!(svg, "</g>");

    if let Some(e) = &ellipse {
        let (cx, cy) = (sx(e.center[0]), sy(e.center[1]));
        let [major, minor] = e.semi_axes;
        if major > 0.0 && minor > 0.0 {
            let _ = writeln!(
                svg,
                r##"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({:.3} {cx:.3} {cy:.3})" fill="#3b75af" fill-opacity="0.15" stroke="#3b75af" stroke-width="1.5"/>"##,
                major * scale,
                minor * scale,
                e.orientation().to_degrees()
            );
        } else if major > 0.0 {
            let [ux, uy] = e.axes[0];
            let _ = writeln!(
                svg,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#3b75af" stroke-width="1.5"/>"##,
                sx(e.center[0] - major * ux),
                sy(e.center[1] - major * uy),
                sx(e.center[0] + major * ux),
                sy(e.center[1] + major * uy)
            );
        }
        let _ = writeln!(
            svg,
            r##"<path d="M {:.3} {cy:.3} H {:.3} M {cx:.3} {:.3} V {:.3}" stroke="#c03" stroke-width="1.5"/>"##,
            cx - 5.0,
            cx + 5.0,
            cy - 5.0,
            cy + 5.0
        );
    }
    let _ = writeln!(svg, r##"<g fill="#e07b00" stroke="#000" stroke-width="0.5">"##);
    for p in &pts {
        let _ = writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="3"/>"#, sx(p[0]), sy(p[1]));
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");

    Ok(CloudPlot { svg, ellipse, warning })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_draws_segment() {
        let cloud = PointCloud::from_xy([[10.0, 5.0], [12.0, 5.0]]).unwrap();
        let plot = render_cloud_svg("pair", &cloud, &PlotOptions::default()).unwrap();
        assert!(plot.svg.contains("<line"));
        assert!(!plot.svg.contains("<ellipse"));
        assert!(plot.ellipse.unwrap().is_degenerate());
        assert!(plot.warning.is_none());
    }

    #[test]
    fn single_point_warns_without_ellipse() {
        let cloud = PointCloud::from_xy([[1.0, 1.0]]).unwrap();
        let plot = render_cloud_svg("one", &cloud, &PlotOptions::default()).unwrap();
        assert!(plot.ellipse.is_none());
        assert!(plot.warning.is_some());
        assert_eq!(plot.svg.matches("<circle").count(), 1);
    }

    #[test]
    fn full_ellipse_is_deterministic() {
        let cloud = PointCloud::from_xy([[0.0, 0.0], [2.0, 1.0], [1.0, 3.0], [-1.0, 1.0]]).unwrap();
        let a = render_cloud_svg("a<b", &cloud, &PlotOptions::default()).unwrap();
        let b = render_cloud_svg("a<b", &cloud, &PlotOptions::default()).unwrap();
        assert_eq!(a.svg, b.svg);
        assert!(a.svg.contains("<ellipse") && a.svg.contains("a&lt;b"));
        assert_eq!(a.svg.matches("<circle").count(), 4);
    }
}
