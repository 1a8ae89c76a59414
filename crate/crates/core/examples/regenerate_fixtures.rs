//! Rewrites the generated files under `data/` and prints a summary of the
//! mined ROI store.

use std::path::Path;

use geonorm::{fixtures, Gazetteer};

fn main() -> geonorm::Result<()> {
    let g = Gazetteer::bundled();
    let bundle = fixtures::build(&g, &fixtures::bundle_config())?;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for (name, contents) in bundle.files() {
        std::fs::write(dir.join(name), contents).expect("writable data directory");
    }
    println!(
        "{} documents, {} sequences, {} tokens, {} ROI entries",
        bundle.corpus.len(),
        bundle.sequences.len(),
        bundle.embeddings.len(),
        bundle.roi.len()
    );
    println!("{}", bundle.roi.meta_json());
    for e in bundle.roi.entries() {
        let support: Vec<String> = e.support.iter().map(|s| format!("{}:{:.2}", s.ad, s.g)).collect();
        println!("{}\t{}\tE={:.3}\t{}", e.term, e.path, e.entropy, support.join(" "));
    }
    Ok(())
}
