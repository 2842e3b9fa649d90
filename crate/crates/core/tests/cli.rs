use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use landmark_variability::Error;

fn lmvar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmvar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate(dir: &Path, scans: &str) {
    let out = lmvar(dir, &["simulate", "--seed", "3", "--scans", scans, "--out", "syn"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn full_pipeline_from_config() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "16");
    let out = lmvar(
        dir.path(),
        &[
            "correlate",
            "--config",
            "syn/run.toml",
            "--bin-size",
            "2",
            "--out",
            "res",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in [
        "report.json",
        "table1_accuracy.csv",
        "table2_uncertainty.csv",
        "table3_reliability.csv",
    ] {
        assert!(dir.path().join("res").join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/report.json")).unwrap()).unwrap();
    assert_eq!(report["metadata"]["bin_size"], 2);
    assert_eq!(report["uncertainty"].as_array().unwrap().len(), 3);

    let out = lmvar(
        dir.path(),
        &[
            "evaluate",
            "--corpus",
            "syn/corpus.jsonl",
            "--strategy",
            "deep_ensembles=syn/samples_deep_ensembles.jsonl",
            "--thresholds",
            "1,2",
            "--folds",
            "2",
            "--out",
            "eval",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("eval/table1_accuracy.csv")).unwrap();
    assert!(table.starts_with("strategy,mre_mm,sdr_1mm,sdr_2mm\ndeep_ensembles,"));

    let out = lmvar(
        dir.path(),
        &[
            "uncertainty",
            "--config",
            "syn/run.toml",
            "--strategy",
            "deep-ensembles",
            "--out",
            "sel",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let written: Vec<_> = fs::read_dir(dir.path().join("sel"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(written.len(), 2, "{written:?}");
    assert!(dir.path().join("sel/uncertainty_deep_ensembles.csv").is_file());

    for sub in ["variability", "uncertainty"] {
        let out = lmvar(
            dir.path(),
            &[sub, "--config", "syn/run.toml", "--epsilon", "1e-5", "--out", "v"],
        );
        assert_eq!(code(&out), 0, "{sub}: {}", stderr(&out));
    }
    assert!(dir.path().join("v/uncertainty_random_sampling.csv").is_file());
    assert!(dir.path().join("v/variability.json").is_file());
}

#[test]
fn schedule_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "8");
    let out = lmvar(
        dir.path(),
        &[
            "schedule",
            "--corpus",
            "syn/corpus.jsonl",
            "--seed",
            "1",
            "--iterations",
            "3",
            "--folds",
            "4",
            "--test-fold",
            "1",
            "--out",
            "s.jsonl",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // 6 training scans x 5 landmarks x 3 iterations.
    assert_eq!(
        fs::read_to_string(dir.path().join("s.jsonl")).unwrap().lines().count(),
        90
    );

    let out = lmvar(
        dir.path(),
        &[
            "plot",
            "--corpus",
            "syn/corpus.jsonl",
            "--scan",
            "scan_002",
            "--out",
            "plots",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_dir(dir.path().join("plots")).unwrap().count(), 5);

    let out = lmvar(
        dir.path(),
        &[
            "plot",
            "--corpus",
            "syn/corpus.jsonl",
            "--scan",
            "nope",
            "--out",
            "plots",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn import_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw/r1");
    fs::create_dir_all(&raw).unwrap();
    fs::write(raw.join("001.txt"), "10,20\n30,40\n").unwrap();
    let out = lmvar(dir.path(), &["import", "--isbi", "raw", "--out", "c.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = lmvar(dir.path(), &["import", "--native", "c.jsonl", "--out", "c2.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(dir.path().join("c.jsonl")).unwrap(),
        fs::read(dir.path().join("c2.jsonl")).unwrap()
    );

    fs::write(raw.join("002.txt"), "10,20\n30,4o\n").unwrap();
    let out = lmvar(dir.path(), &["import", "--isbi", "raw", "--out", "bad.jsonl"]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("002.txt") && stderr(&out).contains("line 2"),
        "{}",
        stderr(&out)
    );

    fs::create_dir_all(dir.path().join("empty")).unwrap();
    assert_eq!(
        code(&lmvar(dir.path(), &["import", "--isbi", "empty", "--out", "e.jsonl"])),
        2
    );
    fs::write(dir.path().join("blank.jsonl"), "").unwrap();
    assert_eq!(
        code(&lmvar(
            dir.path(),
            &["import", "--native", "blank.jsonl", "--out", "e.jsonl"]
        )),
        2
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lmvar(dir.path(), &["evaluate", "--bogus"])), 1);
    assert_eq!(code(&lmvar(dir.path(), &[])), 1);
    assert_eq!(code(&lmvar(dir.path(), &["variability"])), 1);
    assert_eq!(
        code(&lmvar(
            dir.path(),
            &["variability", "--corpus", "x", "--thresholds", "3,2"]
        )),
        1
    );
    assert_eq!(
        code(&lmvar(dir.path(), &["uncertainty", "--strategy", "staple=x.jsonl"])),
        1
    );
    fs::write(dir.path().join("bad.toml"), "sed = 4\n").unwrap();
    assert_eq!(code(&lmvar(dir.path(), &["variability", "--config", "bad.toml"])), 1);
    assert_eq!(code(&lmvar(dir.path(), &["--help"])), 0);
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&lmvar(dir.path(), &["variability", "--corpus", "missing.jsonl"])),
        2
    );
    simulate(dir.path(), "4");
    // Samples for a different corpus leave keys unmatched.
    let out = lmvar(
        dir.path(),
        &["simulate", "--seed", "3", "--scans", "6", "--out", "other"],
    );
    assert_eq!(code(&out), 0);
    let out = lmvar(
        dir.path(),
        &[
            "evaluate",
            "--corpus",
            "syn/corpus.jsonl",
            "--strategy",
            "averaging=other/samples_averaging.jsonl",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("scan_004/0"), "{}", stderr(&out));
    // Ensemble samples handed to an MC strategy.
    let out = lmvar(
        dir.path(),
        &[
            "evaluate",
            "--corpus",
            "syn/corpus.jsonl",
            "--strategy",
            "averaging=syn/samples_deep_ensembles.jsonl",
        ],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn consistency_failures_map_to_three() {
    assert_eq!(Error::Consistency("negative eigenvalue".into()).exit_code(), 3);
    assert_eq!(Error::Consistency("x".into()).in_file("a.jsonl").exit_code(), 3);
}

#[test]
fn simulate_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(a.path(), "5");
    simulate(b.path(), "5");
    for f in [
        "corpus.jsonl",
        "samples_averaging.jsonl",
        "samples_random_sampling.jsonl",
        "samples_deep_ensembles.jsonl",
        "generator.json",
        "run.toml",
    ] {
        assert_eq!(
            fs::read(a.path().join("syn").join(f)).unwrap(),
            fs::read(b.path().join("syn").join(f)).unwrap(),
            "{f}"
        );
    }
}
