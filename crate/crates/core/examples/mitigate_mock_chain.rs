//! Run the accept/reject chain with the offline proposal and print its trace.
use carol::chain::{run_chain, ChainConfig};
use carol::context::build_context;
use carol::embed::Embedder;
use carol::fixtures;
use carol::proposal::{CandidatePool, MockProposal};

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let texts = [fixtures::DENSE_AGREEMENT, fixtures::SPARSE_DISAGREEMENT].concat();
    let pool = CandidatePool::from_texts(&texts, vec![1.0; texts.len()], &embedder)?;

    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = ChainConfig { beta: 2.0, t_max: 48, seed, ..Default::default() };
    let mut proposal = MockProposal::new(pool, seed);
    let out = run_chain("What is the capital of France?", &ctx, &mut proposal, &cfg)?;

    println!("budget: {} steps ({:?})", out.budget.steps, out.budget.source);
    for r in &out.trace {
        let mark = if r.accepted { "+" } else { "-" };
        println!("{mark} {:>3}  dF {:>8.4}  p {:.3}  {}", r.step, r.delta_f, r.p_add, r.candidate);
    }
    // Repeats add nothing to the objective, so they pass with probability one half.
    println!("\nresponse:");
    for u in &out.response {
        println!("  {}", u.text);
    }
    println!("information {:.4} of {:.4}", out.final_eval.mutual_info, out.final_eval.se_prior);
    Ok(())
}
