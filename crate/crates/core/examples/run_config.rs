// Driving the batch commands from a TOML run configuration, the same way
// `lmvar correlate --config run.toml` does.
//
// ```bash
// cargo run --example run_config
// ```

use std::fs;

use landmark_variability::commands::{correlate, simulate, SimulateOptions};
use landmark_variability::config::RunConfig;
use landmark_variability::Result;

pub fn run() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let data = dir.path().join("data");
    fs::create_dir_all(&data)?;
    let mut sim = SimulateOptions::new(5, &data);
    sim.spec.n_scans = 20;
    simulate(&sim)?;

    // simulate writes a run.toml; layer analysis settings over it.
    let base = RunConfig::load(&data.join("run.toml"))?;
    let overrides = RunConfig::from_toml_str(
        r#"
folds = 5
bin_size = 4
bin_order = "sorted"
thresholds = [1.5, 2.0, 3.0]
"#,
    )?;
    let cfg = base.merge(overrides);
    let analysis = cfg.analysis()?;
    let out = dir.path().join("results");
    fs::create_dir_all(&out)?;
    let corpus = cfg.corpus.clone().expect("simulate records the corpus path");
    let outcome = correlate(
        &corpus,
        &cfg.strategy_paths()?,
        cfg.sample_space()?.as_ref(),
        &analysis,
        &out,
    )?;
    println!("{}", outcome.summary);
    let table = fs::read_to_string(out.join("table1_accuracy.csv"))?;
    print!("{table}");
    Ok(table)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
