//! The credentialed run: GPT-4 through an OpenAI-compatible endpoint and a
//! remote sentence embedder over 1,000 NQ dev questions, checked against
//! the published statistics. Costs money and takes a while.
//!
//! TURNPILOT_CHAT_KEY=... TURNPILOT_EMBED_KEY=... cargo run --release \
//!     --example live_reproduction -- <nq-dev.jsonl> <chat-endpoint> <embed-endpoint> [run-dir]

use std::path::Path;
use std::sync::Arc;

use turnpilot::experiment::{
    self, check_live_targets, AnalyzeParams, GenerateOptions, RunDir, ScoreParams,
};
use turnpilot::providers::{
    ChatClient, EmbedClient, RateLimiter, RemoteChat, RemoteEmbedder, ResponseCache, SystemClock,
    REFERENCE_EMBED_MODEL,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [corpus, chat_endpoint, embed_endpoint, rest @ ..] = args.as_slice() else {
        eprintln!(
            "usage: live_reproduction <nq-dev.jsonl> <chat-endpoint> <embed-endpoint> [run-dir]"
        );
        std::process::exit(2);
    };
    let dir = rest.first().cloned().unwrap_or_else(|| "runs/live".into());
    std::fs::create_dir_all(&dir)?;
    let run = RunDir::new(&dir);
    let clock = Arc::new(SystemClock::default());

    let chat = ChatClient::new(Arc::new(RemoteChat::from_env("openai", chat_endpoint)?))
        .with_cache(ResponseCache::new(run.cache_dir()))
        .with_rate_limiter(Arc::new(RateLimiter::new(4, 4.0, clock.clone())));
    let embedder = EmbedClient::new(Arc::new(RemoteEmbedder::from_env(
        embed_endpoint,
        REFERENCE_EMBED_MODEL,
    )?))
    .with_cache(ResponseCache::new(run.cache_dir()))
    .with_rate_limiter(Arc::new(RateLimiter::new(8, 8.0, clock)));

    experiment::ingest(&run, Path::new(corpus), 1000, false)?;
    experiment::truncate(&run, &(0..=3).collect())?;
    experiment::generate(&run, &chat, &GenerateOptions::default())?;
    // Retained counts are reported out of all 1,000 questions, so every
    // example's truncations are scored and labeled.
    experiment::score(
        &run,
        &embedder,
        &ScoreParams {
            score_all: true,
            ..ScoreParams::default()
        },
    )?;
    let stats = experiment::analyze(
        &run,
        &AnalyzeParams {
            score_all: true,
            ..AnalyzeParams::default()
        },
    )?;

    let mut all = true;
    for c in check_live_targets(&stats) {
        println!(
            "{:<26} target {:.2} observed {:.3} {}",
            c.name,
            c.target,
            c.observed,
            if c.pass { "ok" } else { "MISS" }
        );
        all &= c.pass;
    }
    std::process::exit(if all { 0 } else { 1 });
}
