// The three ways of turning multi-rater labels into a training target and
// a prediction.
//
// ```bash
// cargo run --example annotation_fusion
// ```

use std::sync::Arc;

use landmark_variability::annotation::{
    AnnotationSet, CoordinateSpace, LandmarkKey, LandmarkPoint, Provenance, Sample, SampleSet,
};
use landmark_variability::fusion::{average_annotations, fused_prediction, sampling_schedule, FusionStrategy};
use landmark_variability::Result;

pub fn run() -> Result<Vec<usize>> {
    let space = Arc::new(CoordinateSpace::isbi_original());
    let key = LandmarkKey::new("017", 3);
    let raters = [(401.0, 988.0), (407.0, 992.0), (398.0, 1001.0), (410.0, 985.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Ok((format!("r{i}"), LandmarkPoint::new(x, y, space.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let set = AnnotationSet::new(key.clone(), raters)?;

    // Averaging trains on a single silver label.
    let silver = average_annotations(&set);
    println!("averaging target: ({:.2}, {:.2}) px", silver.x, silver.y);

    // Random sampling trains on a different rater each iteration.
    let draws = sampling_schedule(42, set.n_raters(), 12)?;
    let ids: Vec<&str> = draws.iter().map(|&i| set.rater_points()[i].0.as_str()).collect();
    println!("random-sampling schedule (seed 42): {}", ids.join(" "));

    // Ensembles train one model per rater and average their predictions.
    let members = set
        .rater_points()
        .iter()
        .map(|(_, p)| Sample {
            point: LandmarkPoint {
                x: p.x + 1.5,
                ..p.clone()
            },
            heatmap_max: Some(0.8),
        })
        .collect();
    let ensemble = SampleSet::new(key.clone(), Provenance::Ensemble, members)?;
    let fused = fused_prediction(FusionStrategy::DeepEnsembles, &ensemble)?;
    println!("ensemble prediction: ({:.2}, {:.2}) px", fused.x, fused.y);

    // Feeding MC-dropout samples to the ensemble path is a provenance error.
    let mc = SampleSet::new(key, Provenance::McDropout, ensemble.samples().to_vec())?;
    if let Err(e) = fused_prediction(FusionStrategy::DeepEnsembles, &mc) {
        println!("rejected: {e}");
    }
    Ok(draws)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
