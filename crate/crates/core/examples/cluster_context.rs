//! Cluster the trusted context around a response and compare two partitions.
use carol::cluster::{partition_agreement, Clustering, Origin, SemanticUnit};
use carol::context::build_context;
use carol::embed::Embedder;
use carol::fixtures;

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let beta = 1.0;

    let response = SemanticUnit::embed_all(fixtures::DENSE_AGREEMENT, &embedder, Origin::Proposed)?;
    let clustering = Clustering::build(&ctx, &response, beta)?;
    for (medoid, members) in clustering.medoids.iter().zip(clustering.members()) {
        println!("{}", medoid.text);
        for x in members {
            let soft = &clustering.soft[x];
            println!("    {:<55} soft {:?}", ctx.axioms()[x].text, soft.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>());
        }
    }

    // Dropping one medoid reassigns its axioms; agreement shows how much moved.
    let smaller = Clustering::build(&ctx, &response[..2], beta)?;
    let agreement = partition_agreement(&clustering.assignment, &smaller.assignment)?;
    println!("\nthree medoids vs two: ARI {:.3}, NMI {:.3}", agreement.ari, agreement.nmi);
    Ok(())
}
