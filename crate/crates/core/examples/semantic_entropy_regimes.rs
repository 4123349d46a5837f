//! Prior entropy, posterior entropy and information for three kinds of response.
use carol::cluster::{Origin, SemanticUnit};
use carol::context::build_context;
use carol::embed::Embedder;
use carol::fixtures;
use carol::objective::{hallucination_score, mutual_info};

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let beta = 1.0;

    println!("{:<10} {:>8} {:>8} {:>8} {:>8}", "response", "prior", "post", "info", "score");
    for (name, texts) in [
        ("dense", fixtures::DENSE_AGREEMENT),
        ("partial", fixtures::PARTIAL_SUPPORT),
        ("sparse", fixtures::SPARSE_DISAGREEMENT),
    ] {
        let units = SemanticUnit::embed_all(texts, &embedder, Origin::Proposed)?;
        let eval = mutual_info(&ctx, &units, beta)?;
        let score = hallucination_score(&ctx, &units, beta)?;
        println!(
            "{name:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            eval.se_prior, eval.se_posterior, eval.mutual_info, score
        );
    }
    Ok(())
}
