//! Embed the trusted context and pull the axioms closest to a question.
use carol::context::{build_context, retrieve_topk};
use carol::embed::Embedder;
use carol::fixtures;
use carol::semantics::entailment_score;

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    println!("{} axioms, dimension {}, embedder {}", ctx.len(), ctx.dim(), ctx.embedder_fingerprint());

    let question = "Which city is the capital of France?";
    let q = embedder.embed(question)?;
    println!("\ntop 3 for {question:?}:");
    for ax in retrieve_topk(&ctx, &q, 3)?.axioms() {
        println!("  {:.3}  {}  {}", entailment_score(&q, &ax.embedding)?, ax.id, ax.text);
    }
    Ok(())
}
