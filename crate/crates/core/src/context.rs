//! The trusted context: an ordered set of axioms with embeddings.
//!
//! On disk a context is JSONL. The first line is a header
//! `{"embedder_fingerprint": "..."}`; every following line is one axiom
//! `{"id": "...", "text": "...", "embedding": [...]}`. Floats are written in
//! shortest round-trip form, so a save/load cycle is bit-exact.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{CarolError, Result};
use crate::semantics::entailment_distance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axiom {
    pub id: String,
    pub text: String,
    pub embedding: EmbeddingVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    axioms: Vec<Axiom>,
    embedder_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    embedder_fingerprint: String,
}

/// Result of [`load_context`]; `fingerprint_mismatch` is set when the file was
/// embedded with a configuration other than the one the caller expects.
#[derive(Clone, Debug)]
pub struct LoadedContext {
    pub context: Context,
    pub fingerprint_mismatch: bool,
}

impl Context {
    pub fn from_axioms(axioms: Vec<Axiom>, embedder_fingerprint: impl Into<String>) -> Result<Self> {
        if axioms.is_empty() {
            return Err(CarolError::input("context must contain at least one axiom"));
        }
        let dim = axioms[0].embedding.dim();
        let mut seen = HashSet::new();
        for ax in &axioms {
            if ax.text.trim().is_empty() {
                return Err(CarolError::input(format!("axiom {} has empty text", ax.id)));
            }
            if !seen.insert(ax.id.as_str()) {
                return Err(CarolError::input(format!("duplicate axiom id {}", ax.id)));
            }
            if ax.embedding.dim() != dim {
                return Err(CarolError::input(format!(
                    "axiom {} has dimension {}, expected {dim}",
                    ax.id,
                    ax.embedding.dim()
                )));
            }
        }
        Ok(Context {
            axioms,
            embedder_fingerprint: embedder_fingerprint.into(),
        })
    }

    /// Context over raw vectors with generated ids; handy for synthetic instances.
    pub fn from_embeddings(embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        let axioms = embeddings
            .into_iter()
            .enumerate()
            .map(|(i, embedding)| Axiom {
                id: axiom_id(i),
                text: format!("axiom {}", i + 1),
                embedding,
            })
            .collect();
        Context::from_axioms(axioms, "raw")
    }

    pub fn axioms(&self) -> &[Axiom] {
        &self.axioms
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.axioms[0].embedding.dim()
    }

    pub fn embedder_fingerprint(&self) -> &str {
        &self.embedder_fingerprint
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.axioms.iter().map(|a| a.id.as_str())
    }
}

fn axiom_id(index: usize) -> String {
    format!("ax-{:04}", index + 1)
}

/// Embeds each non-blank statement into an axiom with ids `ax-0001`, `ax-0002`, ...
pub fn build_context<S: AsRef<str>>(statements: &[S], embedder: &Embedder) -> Result<Context> {
    let texts: Vec<&str> = statements
        .iter()
        .map(|s| s.as_ref().trim())
        .filter(|s| !s.is_empty())
        .collect();
    if texts.is_empty() {
        return Err(CarolError::input("no non-empty statements to build a context from"));
    }
    let embeddings = embedder.embed_batch(&texts)?;
    let axioms = texts
        .into_iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, (text, embedding))| Axiom {
            id: axiom_id(i),
            text: text.to_string(),
            embedding,
        })
        .collect();
    Context::from_axioms(axioms, embedder.fingerprint())
}

/// The `k` axioms closest to the query (all of them when `k >= |ctx|`), in
/// their original order. Equal distances favour the lower index.
pub fn retrieve_topk(ctx: &Context, query: &EmbeddingVector, k: usize) -> Result<Context> {
    if ctx.is_empty() {
        return Err(CarolError::input("cannot retrieve from an empty context"));
    }
    if k == 0 {
        return Err(CarolError::input("k must be at least 1"));
    }
    if k >= ctx.len() {
        return Ok(ctx.clone());
    }
    let mut ranked = ctx
        .axioms
        .iter()
        .enumerate()
        .map(|(i, ax)| entailment_distance(query, &ax.embedding).map(|d| (d, i)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = ranked.into_iter().take(k).map(|(_, i)| i).collect();
    keep.sort_unstable();
    Ok(Context {
        axioms: keep.into_iter().map(|i| ctx.axioms[i].clone()).collect(),
        embedder_fingerprint: ctx.embedder_fingerprint.clone(),
    })
}

pub fn save_context(ctx: &Context, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CarolError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = Header {
        embedder_fingerprint: ctx.embedder_fingerprint.clone(),
    };
    let mut write_line = |value: String| writeln!(out, "{value}").map_err(|e| CarolError::io(path, e));
    write_line(serde_json::to_string(&header).expect("header serializes"))?;
    for ax in &ctx.axioms {
        write_line(serde_json::to_string(ax).expect("axiom serializes"))?;
    }
    out.flush().map_err(|e| CarolError::io(path, e))
}

/// Loads a context file. When `expected_fingerprint` is given and differs
/// from the file's header, the context still loads but is flagged.
pub fn load_context(path: &Path, expected_fingerprint: Option<&str>) -> Result<LoadedContext> {
    let file = File::open(path).map_err(|e| CarolError::io(path, e))?;
    let parse_err = |line: usize, message: String| CarolError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut fingerprint = String::new();
    let mut axioms = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CarolError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 && line.contains("\"embedder_fingerprint\"") {
            let header: Header =
                serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
            fingerprint = header.embedder_fingerprint;
            continue;
        }
        let ax: Axiom = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        axioms.push(ax);
    }
    let context = Context::from_axioms(axioms, fingerprint).map_err(|e| parse_err(0, e.to_string()))?;
    let fingerprint_mismatch =
        expected_fingerprint.is_some_and(|fp| fp != context.embedder_fingerprint);
    if fingerprint_mismatch {
        log::warn!(
            "context {} was embedded with `{}`, current embedder is `{}`",
            path.display(),
            context.embedder_fingerprint,
            expected_fingerprint.unwrap_or_default()
        );
    }
    Ok(LoadedContext {
        context,
        fingerprint_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn builds_trusted_context() {
        let ctx = build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap();
        assert_eq!(ctx.len(), 10);
        assert_eq!(ctx.axioms()[0].id, "ax-0001");
        assert_eq!(ctx.axioms()[9].id, "ax-0010");
        assert_eq!(build_context(&["x"], &Embedder::builtin()).unwrap().len(), 1);
        assert!(build_context::<&str>(&[], &Embedder::builtin()).is_err());
        assert!(build_context(&["", "  "], &Embedder::builtin()).is_err());
    }

    #[test]
    fn rejects_duplicate_ids_and_mixed_dims() {
        let ax = |id: &str, e: &[f64]| Axiom {
            id: id.into(),
            text: "t".into(),
            embedding: v(e),
        };
        assert!(Context::from_axioms(vec![ax("a", &[1.0]), ax("a", &[1.0])], "").is_err());
        assert!(Context::from_axioms(vec![ax("a", &[1.0]), ax("b", &[1.0, 0.0])], "").is_err());
    }

    #[test]
    fn topk_matches_exhaustive_scan() {
        let ctx = build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap();
        let q = Embedder::builtin().embed("Where is the Louvre?").unwrap();
        let best = ctx
            .axioms()
            .iter()
            .map(|a| entailment_distance(&q, &a.embedding).unwrap())
            .enumerate()
            .fold((usize::MAX, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
        let top = retrieve_topk(&ctx, &q, 1).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top.axioms()[0], ctx.axioms()[best.0]);

        assert_eq!(retrieve_topk(&ctx, &q, 10).unwrap(), ctx);
        assert_eq!(retrieve_topk(&ctx, &q, 50).unwrap(), ctx);
        let five = retrieve_topk(&ctx, &q, 5).unwrap();
        assert_eq!(five.len(), 5);
        let positions: Vec<usize> = five
            .ids()
            .map(|id| ctx.ids().position(|x| x == id).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(retrieve_topk(&ctx, &q, 0).is_err());
    }

    #[test]
    fn topk_tie_prefers_lower_index() {
        let ctx = Context::from_embeddings(vec![v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let top = retrieve_topk(&ctx, &v(&[1.0, 0.0]), 1).unwrap();
        assert_eq!(top.axioms()[0].id, "ax-0002");
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ctx = build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ctx.jsonl");
        save_context(&ctx, &path).unwrap();
        let loaded = load_context(&path, Some(&Embedder::builtin().fingerprint())).unwrap();
        assert!(!loaded.fingerprint_mismatch);
        assert_eq!(loaded.context, ctx);
        for (a, b) in loaded.context.axioms().iter().zip(ctx.axioms()) {
            assert!(a.embedding.bit_eq(&b.embedding));
        }
    }

    #[test]
    fn truncated_file_names_line() {
        let ctx = build_context(&["alpha", "beta", "gamma"], &Embedder::builtin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ctx.jsonl");
        save_context(&ctx, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 40]).unwrap();
        match load_context(&path, None) {
            Err(CarolError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn fingerprint_mismatch_is_flagged() {
        let ctx = build_context(&["alpha"], &Embedder::builtin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ctx.jsonl");
        save_context(&ctx, &path).unwrap();
        let loaded = load_context(&path, Some("something-else")).unwrap();
        assert!(loaded.fingerprint_mismatch);
        assert_eq!(loaded.context, ctx);
    }
}
