//! Greedy medoid selection against the best subset found by brute force.
use carol::cluster::{facility_location_value, greedy_medoid_indices, Origin, SemanticUnit, DEFAULT_PHANTOM_DISTANCE};
use carol::context::build_context;
use carol::embed::Embedder;
use carol::fixtures;

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let candidates = SemanticUnit::embed_all(fixtures::PARAPHRASE_SET, &embedder, Origin::Fixture)?;
    let n = candidates.len();

    for k in 1..=4 {
        let picked = greedy_medoid_indices(&ctx, &candidates, k)?;
        let chosen: Vec<SemanticUnit> = picked.iter().map(|&i| candidates[i].clone()).collect();
        let greedy = facility_location_value(&ctx, &chosen, DEFAULT_PHANTOM_DISTANCE)?;

        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let set: Vec<SemanticUnit> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| candidates[i].clone()).collect();
            best = best.max(facility_location_value(&ctx, &set, DEFAULT_PHANTOM_DISTANCE)?);
        }
        println!("k={k}  greedy {greedy:.4}  best {best:.4}  ratio {:.4}  picked {picked:?}", greedy / best);
    }
    Ok(())
}
