//! Load the fixture corpus and print each question's truncated variants.

use std::path::Path;

use turnpilot::corpus::{build_variants, load_corpus};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/nq_fixture.jsonl");
    let (examples, manifest) = load_corpus(&path, 5, false).expect("fixture loads");
    println!(
        "scanned {} lines, kept {}",
        manifest.scanned, manifest.loaded
    );
    let (variants, skipped) = build_variants(&examples, &(0..=3).collect()).unwrap();
    for v in &variants {
        println!("{:>3} res{}  {}", v.example_id, v.level, v.text);
    }
    for s in skipped {
        println!("skipped {} level {}", s.id, s.level);
    }
}
