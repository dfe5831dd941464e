//! Cosine similarity on raw vectors and on text through the offline embedder.

use turnpilot::providers::EmbedClient;
use turnpilot::semscore::{cosine_similarity, semscore};

fn main() {
    println!(
        "cos([1,0],[1,1]) = {:.4}",
        cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap()
    );

    let embedder = EmbedClient::deterministic();
    let reference = "Paris is the capital and most populous city of France.";
    for answer in [
        "The capital of France is Paris.",
        "France's largest city and capital is Paris.",
        "I'm not sure what you are asking.",
    ] {
        let s = semscore(reference, answer, &embedder).unwrap();
        println!("{s:.3}  {answer}");
    }
}
