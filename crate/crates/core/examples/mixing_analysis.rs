//! Curvature, the closed-form mixing bound and the measured mixing time per pool.
use carol::analysis::{analyze_pool, AnalysisConfig};
use carol::context::build_context;
use carol::embed::Embedder;
use carol::fixtures;
use carol::proposal::CandidatePool;

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let cfg = AnalysisConfig { replicas: 500, ..Default::default() };
    let pools: [(&str, Vec<&str>); 3] = [
        ("dense+sparse", [fixtures::DENSE_AGREEMENT, fixtures::SPARSE_DISAGREEMENT].concat()),
        ("duplicates", vec!["Paris is the capital of France"; 4]),
        ("paraphrase", fixtures::PARAPHRASE_SET[..6].to_vec()),
    ];

    for beta in [0.25, 1.0] {
        println!("beta = {beta}");
        for (name, texts) in &pools {
            let pool = CandidatePool::from_texts(texts, vec![1.0; texts.len()], &embedder)?;
            let r = analyze_pool(&ctx, &pool, beta, &cfg)?;
            let tau = r.tau_theorem.map_or("vacuous".to_string(), |t| format!("{t:.1}"));
            let tmix = r.empirical_tmix.map_or("-".to_string(), |t| t.to_string());
            println!("  {name:<14} gamma {:>7.4}  tau {tau:>8}  tmix {tmix:>4}", r.gamma_bar);
        }
    }
    Ok(())
}
