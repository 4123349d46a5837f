//! Context to chain to analysis, checked against hand computations.

use carol::analysis::{empirical_mixing, empirical_mixing_kernel, enumerate_stationary, theorem_bound, BoundForm, ToggleKernel};
use carol::chain::{check_string_submodularity, run_chain, write_trace, ChainConfig, ChainMode};
use carol::cluster::Clustering;
use carol::context::{build_context, retrieve_topk, Context};
use carol::embed::Embedder;
use carol::fixtures;
use carol::objective::{hallucination_score, mutual_info, semantic_entropy_prior};
use carol::proposal::{CandidatePool, MockProposal};

fn trusted() -> Context {
    build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap()
}

fn pool(texts: &[&str]) -> CandidatePool {
    CandidatePool::from_texts(texts, vec![1.0; texts.len()], &Embedder::builtin()).unwrap()
}

#[test]
fn single_candidate_at_zero_beta_mixes_fast() {
    let ctx = trusted();
    let p = pool(&["Paris is the capital of France"]);
    let emp = empirical_mixing(&ctx, &p, 0.0, 0.05, 64, 200, 0).unwrap();
    // One fair coin per step: exactly stationary after the first toggle proposal.
    assert!(emp.tmix.unwrap() <= 10);
    assert_eq!(emp.tmix, Some(1));
}

#[test]
fn two_state_chain_mixes_in_one_step() {
    // Table [0, f]: a two-state chain with rates a = logistic(beta f) and
    // b = 1 - a, so its second eigenvalue 1 - a - b is zero.
    let f: f64 = 0.8;
    let beta: f64 = 1.5;
    let k = ToggleKernel::new(vec![0.0, f], vec![1.0], beta).unwrap();
    let up = 1.0 / (1.0 + (-beta * f).exp());
    assert!((k.p_add(0, 0) - up).abs() < 1e-15);
    let pi = k.stationary();
    let next = k.evolve(&[1.0, 0.0]);
    assert!((next[1] - up).abs() < 1e-15);
    assert!((next[1] - pi[1]).abs() < 1e-15);
}

#[test]
fn analysis_numbers_are_stable_across_calls() {
    let ctx = trusted();
    let p = pool(&[fixtures::DENSE_AGREEMENT, fixtures::SPARSE_DISAGREEMENT].concat());
    let a = theorem_bound(&ctx, &p, 1.0, 0.05, BoundForm::Theorem).unwrap();
    let b = theorem_bound(&ctx, &p, 1.0, 0.05, BoundForm::Theorem).unwrap();
    assert_eq!(a, b);
    let kernel = ToggleKernel::from_pool(&ctx, &p, 1.0).unwrap();
    let e1 = empirical_mixing_kernel(&kernel, 0.05, 2048, 300, 4).unwrap();
    let e2 = empirical_mixing_kernel(&kernel, 0.05, 2048, 300, 4).unwrap();
    assert_eq!(e1, e2);
    assert_eq!(enumerate_stationary(&ctx, &p, 1.0).unwrap(), kernel.stationary());
    assert!(e1.tmix.unwrap() as f64 <= a.tau_theorem.unwrap());
}

#[test]
fn retrieval_then_chain_then_score() {
    let embedder = Embedder::builtin();
    let full = trusted();
    let query = embedder.embed("Where is the Eiffel Tower?").unwrap();
    let ctx = retrieve_topk(&full, &query, 6).unwrap();
    assert_eq!(ctx.len(), 6);

    let p = pool(&[fixtures::DENSE_AGREEMENT, fixtures::PARTIAL_SUPPORT].concat());
    let cfg = ChainConfig { beta: 2.0, t_max: 40, seed: 9, ..Default::default() };
    let out = run_chain("Where is the Eiffel Tower?", &ctx, &mut MockProposal::new(p.clone(), 9), &cfg).unwrap();
    let direct = mutual_info(&ctx, &out.response, 2.0).unwrap();
    assert_eq!(out.final_eval, direct);
    assert!(direct.mutual_info <= semantic_entropy_prior(&ctx).unwrap());
    if !out.response.is_empty() {
        let score = hallucination_score(&ctx, &out.response, 2.0).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&score));
        let clustering = Clustering::build(&ctx, &out.response, 2.0).unwrap();
        assert_eq!(clustering.members().iter().map(Vec::len).sum::<usize>(), ctx.len());
    }

    let toggle = ChainConfig { mode: ChainMode::Toggle, ..cfg };
    let t = run_chain("q", &ctx, &mut MockProposal::new(p, 9), &toggle).unwrap();
    assert_eq!(t.final_eval, mutual_info(&ctx, &t.response, 2.0).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    write_trace(&out.trace, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), out.trace.len());
}

#[test]
fn submodularity_violations_are_reported_and_persisted() {
    let ctx = trusted();
    let p = pool(&[fixtures::DENSE_AGREEMENT, fixtures::SPARSE_DISAGREEMENT].concat()[..5]);
    let violations = check_string_submodularity(&ctx, &p, 1.0).unwrap();
    for v in &violations {
        assert!(v.slack < 0.0);
        assert!((v.gain_prefix - v.gain_extension - v.slack).abs() < 1e-15);
        assert!(v.extension.starts_with(&v.prefix) && v.extension.len() > v.prefix.len());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("violations.json");
    std::fs::write(&path, serde_json::to_string(&violations).unwrap()).unwrap();
    let back: Vec<carol::chain::SubmodularityViolation> =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, violations);

    let dupes = pool(&["Paris is the capital of France"; 3]);
    assert!(check_string_submodularity(&ctx, &dupes, 1.0).unwrap().is_empty());
}
