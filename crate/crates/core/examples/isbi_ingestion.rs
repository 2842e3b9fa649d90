// Importing ISBI-style per-rater coordinate files into a native corpus.
//
// Each rater has a folder of `<scan>.txt` files with one `x,y` line per
// landmark, optionally followed by non-coordinate trailer lines.
//
// ```bash
// cargo run --example isbi_ingestion
// ```

use std::fs;

use landmark_variability::annotation::CoordinateSpace;
use landmark_variability::commands::{import, load_corpus, ImportOptions};
use landmark_variability::{Corpus, Result};

pub fn run() -> Result<Corpus> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("raw");
    for (rater, shift) in [("senior", 0), ("junior", 7)] {
        fs::create_dir_all(raw.join(rater))?;
        for scan in ["001", "002"] {
            let mut text = String::new();
            for lm in 0..19 {
                text.push_str(&format!("{},{}\n", 800 + 20 * lm + shift, 1000 + 15 * lm - shift));
            }
            text.push_str("2\n");
            fs::write(raw.join(rater).join(format!("{scan}.txt")), text)?;
        }
    }

    let out = dir.path().join("corpus.jsonl");
    let outcome = import(&ImportOptions {
        isbi_dir: Some(raw),
        native: None,
        space: CoordinateSpace::isbi_original(),
        landmarks: Some(vec![0, 1, 4]),
        landmark_names: Some(vec!["sella".into(), "nasion".into(), "porion".into()]),
        out: out.clone(),
    })?;
    println!("{}", outcome.summary);
    let corpus = load_corpus(&out)?;
    for set in corpus.sets().iter().take(3) {
        let name = &corpus.landmarks()[set.landmark_id() as usize].name;
        println!("  {} ({name}): {} raters", set.key(), set.n_raters());
    }

    // A malformed line is reported with its file and line number.
    fs::write(dir.path().join("bad.txt"), "801,1000\n80l,1015\n")?;
    let bad = fs::read(dir.path().join("bad.txt"))?;
    let space = std::sync::Arc::new(CoordinateSpace::isbi_original());
    if let Err(e) = landmark_variability::annotation::parse_isbi_annotation_file(&bad, &space) {
        println!("parse error: {e}");
    }
    Ok(corpus)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run().map(|_| ())
}
