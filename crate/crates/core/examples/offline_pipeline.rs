//! The whole experiment offline: recorded chat responses, hashed-bag
//! embeddings, gold subset, labels and retained counts.
//!
//! cargo run --example offline_pipeline -- [run-dir]

use std::path::Path;
use std::sync::Arc;

use turnpilot::experiment::{self, AnalyzeParams, GenerateOptions, RunDir, ScoreParams};
use turnpilot::providers::{load_recorded, ChatClient, EmbedClient, MockChat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "runs/offline".into());
    std::fs::create_dir_all(&dir)?;
    let run = RunDir::new(&dir);

    experiment::ingest(&run, &fixtures.join("nq_fixture.jsonl"), 1000, false)?;
    experiment::truncate(&run, &(0..=3).collect())?;
    let chat = ChatClient::new(Arc::new(MockChat::new(load_recorded(
        &fixtures.join("recorded_responses.jsonl"),
    )?)));
    let g = experiment::generate(&run, &chat, &GenerateOptions::default())?;
    println!("generated {} (reused {})", g.requested, g.reused);
    experiment::score(&run, &EmbedClient::deterministic(), &ScoreParams::default())?;
    let stats = experiment::analyze(&run, &AnalyzeParams::default())?;

    let r = &stats.ref_vs_res0;
    println!(
        "ref vs res0: mean {:.3} sd {:.3} p75 {:.3}",
        r.mean, r.sd, r.percentiles[&75]
    );
    println!(
        "gold subset: {} examples above {:.3}",
        stats.gold.size, stats.gold.threshold
    );
    for (level, kept) in &stats.retained {
        println!(
            "level {level}: answer retained for {} of {}",
            kept.count, stats.total_examples
        );
    }
    println!("digest {}", run.digest()?);
    Ok(())
}
