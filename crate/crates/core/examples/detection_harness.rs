//! Score a synthetic labelled corpus with both detectors and compare ROC areas.
use carol::context::build_context;
use carol::detect::{detect, synthetic_corpus, SyntheticCorpusConfig};
use carol::embed::Embedder;
use carol::fixtures;

fn main() -> carol::Result<()> {
    let embedder = Embedder::builtin();
    let ctx = build_context(fixtures::TRUSTED_CONTEXT, &embedder)?;
    let corpus = synthetic_corpus(&SyntheticCorpusConfig::default())?;
    println!("{} items", corpus.len());

    for report in detect(&corpus, &ctx, &embedder, 1.0)? {
        let m = &report.metrics;
        println!(
            "{:<18} auc {:.4}  threshold {:.4}  accuracy {:.3}  precision {}  recall {}",
            report.method,
            report.auc,
            report.threshold,
            m.accuracy,
            m.precision.map_or("-".into(), |p| format!("{p:.3}")),
            m.recall.map_or("-".into(), |r| format!("{r:.3}")),
        );
    }
    Ok(())
}
