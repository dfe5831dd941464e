//! Which filler a prefix gets, and how the filler policy trades gap for
//! answering from a prefix.

use std::sync::Arc;

use turnpilot::completeness::{self, synthetic, TrainConfig};
use turnpilot::turnsim::{
    choose_filler, run_policy, FillerTemplates, LatencyProfile, TurnInput, TurnPolicy,
};

fn main() {
    let templates = FillerTemplates::builtin();
    for prefix in [
        "how do i get from new york to",
        "who sang the",
        "tell me about",
    ] {
        println!("{prefix:<32} -> {}", choose_filler(prefix, &templates, 0));
    }

    let config = TrainConfig::default();
    let model = completeness::train(&synthetic::prefix_instances(1000, 7), &config).unwrap();
    let turns: Vec<TurnInput> = [
        "who wrote the song",
        "what is the capital of",
        "who played the river in the movie",
    ]
    .iter()
    .enumerate()
    .map(|(i, q)| TurnInput::new(i.to_string(), *q, 60))
    .collect();
    let r = run_policy(
        &turns,
        &TurnPolicy::filler(Arc::new(model)),
        &LatencyProfile::paper_groq(),
        None,
    )
    .unwrap();
    for t in &r.turns {
        match &t.filler_text {
            Some(f) => println!("{}: filler {f:?} at {} ms", t.example_id, t.gap_ms),
            None => println!(
                "{}: answered from prefix (cut {}), gap {:.0} ms",
                t.example_id, t.words_cut, t.gap_ms
            ),
        }
    }
}
