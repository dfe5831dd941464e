//! Train the prefix completeness classifier on synthetic prefixes and watch
//! it score a question word by word.

use turnpilot::completeness::{self, classify_incremental, synthetic, TrainConfig, DEFAULT_CUTOFF};

fn main() {
    let config = TrainConfig::default();
    let data = synthetic::prefix_instances(2000, config.seed);
    let (train, held_out) = completeness::split(&data, config.split, config.seed);
    let model = completeness::train(&train, &config).expect("both classes present");
    let m = completeness::evaluate(&model, &held_out).unwrap();
    println!(
        "held out: accuracy {:.3}, auc {:.3}",
        m.accuracy,
        m.roc_auc.unwrap_or(f64::NAN)
    );

    let words = ["who", "played", "the", "bridge", "in", "the", "movie"];
    let r = classify_incremental(&model, words, DEFAULT_CUTOFF).unwrap();
    for (w, s) in words.iter().zip(&r.scores) {
        println!("{w:>8} {s:.3}");
    }
    match r.fired_at {
        Some(i) => println!("complete enough after word {i}"),
        None => println!("never reached {DEFAULT_CUTOFF}"),
    }
}
