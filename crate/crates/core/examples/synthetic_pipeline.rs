// End-to-end run on a synthetic corpus: spread ordering between strategies
// and the agreement of predictive uncertainty with rater variability.
//
// ```bash
// cargo run --release --example synthetic_pipeline
// ```

use landmark_variability::fusion::FusionStrategy;
use landmark_variability::report::{build_report, AnalysisConfig, Report};
use landmark_variability::synthetic::{
    default_sample_count, generate_annotations, generate_prediction_samples, GeneratorSpec,
};
use landmark_variability::Result;

pub fn run() -> Result<Report> {
    let mut spec = GeneratorSpec::cephalometric(11);
    spec.n_scans = 40;
    let corpus = generate_annotations(&spec)?;
    let strategies = FusionStrategy::ALL
        .iter()
        .map(|&s| {
            Ok((
                s,
                generate_prediction_samples(&spec, s, default_sample_count(&spec, s))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let report = build_report(&corpus, &strategies, &AnalysisConfig::default())?;
    let na = |r: Option<f64>| r.map_or("NA".into(), |r| format!("{r:.3}"));
    println!(
        "inter-rater: CVar {:.3} mm, PSV {:.3} mm",
        report.inter_rater_mean.cvar_mm, report.inter_rater_mean.psv_mm
    );
    println!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "strategy", "MRE", "CVar", "PSV", "WCVar", "r(CVar)"
    );
    for (acc, unc) in report.accuracy.iter().zip(&report.uncertainty) {
        println!(
            "{:<16} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8}",
            acc.strategy.name(),
            acc.mre_mm,
            unc.mean.cvar_mm,
            unc.mean.psv_mm,
            unc.mean.wcvar_mm,
            na(unc.variability_correlation.cvar)
        );
    }
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
