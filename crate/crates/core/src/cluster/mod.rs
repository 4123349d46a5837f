//! Exemplar clustering of the context around response units.
//!
//! Every axiom goes to the medoid at smallest [`entailment_distance`]; ties go
//! to the lowest medoid index. A medoid whose embedding is bit-identical to an
//! earlier one is a duplicate: it never receives axioms and gets zero soft
//! weight, so appending a duplicate leaves every downstream quantity unchanged.

mod agreement;
mod facility;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use agreement::{partition_agreement, Agreement};
pub use facility::{
    facility_location_value, greedy_medoid_indices, greedy_medoids, FacilityLocation,
    DEFAULT_PHANTOM_DISTANCE,
};

use crate::context::Context;
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{CarolError, Result};
use crate::semantics::entailment_distance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Proposed,
    Accepted,
    Fixture,
}

/// One ℓ-gram: the unit that is proposed, scored and accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticUnit {
    pub text: String,
    pub embedding: EmbeddingVector,
    pub origin: Origin,
}

impl SemanticUnit {
    pub fn new(text: impl Into<String>, embedding: EmbeddingVector, origin: Origin) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CarolError::input("semantic unit text is empty"));
        }
        Ok(SemanticUnit {
            text,
            embedding,
            origin,
        })
    }

    pub fn embed(text: &str, embedder: &Embedder, origin: Origin) -> Result<Self> {
        let embedding = embedder.embed(text)?;
        SemanticUnit::new(text, embedding, origin)
    }

    pub fn embed_all<S: AsRef<str>>(texts: &[S], embedder: &Embedder, origin: Origin) -> Result<Vec<Self>> {
        let embeddings = embedder.embed_batch(texts)?;
        texts
            .iter()
            .zip(embeddings)
            .map(|(t, e)| SemanticUnit::new(t.as_ref(), e, origin))
            .collect()
    }
}

/// Distances `d[x][i]` from axiom `x` to medoid `i`.
pub(crate) fn distance_matrix(ctx: &Context, medoids: &[SemanticUnit]) -> Result<Vec<Vec<f64>>> {
    if ctx.is_empty() {
        return Err(CarolError::input("context is empty"));
    }
    if medoids.is_empty() {
        return Err(CarolError::input("at least one medoid is required"));
    }
    ctx.axioms()
        .iter()
        .map(|ax| {
            medoids
                .iter()
                .map(|m| entailment_distance(&m.embedding, &ax.embedding))
                .collect()
        })
        .collect()
}

/// `true` at index `i` when medoid `i` is the first occurrence of its embedding.
pub(crate) fn distinct_mask(medoids: &[SemanticUnit]) -> Vec<bool> {
    (0..medoids.len())
        .map(|i| !medoids[..i].iter().any(|m| m.embedding.bit_eq(&medoids[i].embedding)))
        .collect()
}

pub(crate) fn hard_from_distances(dist: &[Vec<f64>]) -> Vec<usize> {
    dist.iter()
        .map(|row| {
            let mut best = 0;
            for (i, &d) in row.iter().enumerate().skip(1) {
                if d < row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub(crate) fn soft_from_distances(dist: &[Vec<f64>], distinct: &[bool], beta: f64) -> Vec<Vec<f64>> {
    dist.iter()
        .map(|row| {
            let logits: Vec<Option<f64>> = row
                .iter()
                .zip(distinct)
                .map(|(&d, &keep)| keep.then_some(-beta * d))
                .collect();
            let max = logits.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits
                .iter()
                .map(|l| l.map_or(0.0, |l| (l - max).exp()))
                .collect();
            let total: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / total).collect()
        })
        .collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CarolError::input(format!("beta must be finite and > 0, got {beta}")));
    }
    Ok(())
}

/// Hard assignment: index of the nearest medoid for every axiom, in context order.
pub fn exemplar_cluster(ctx: &Context, medoids: &[SemanticUnit]) -> Result<Vec<usize>> {
    Ok(hard_from_distances(&distance_matrix(ctx, medoids)?))
}

/// Per-axiom probabilities over medoids, `softmax(-beta * distance)`.
pub fn soft_assignment(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<Vec<Vec<f64>>> {
    check_beta(beta)?;
    let dist = distance_matrix(ctx, medoids)?;
    Ok(soft_from_distances(&dist, &distinct_mask(medoids), beta))
}

/// A full clustering of a context around a list of medoids.
#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub medoids: Vec<SemanticUnit>,
    pub axiom_ids: Vec<String>,
    pub assignment: Vec<usize>,
    pub soft: Vec<Vec<f64>>,
    pub beta: f64,
}

impl Clustering {
    pub fn build(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let dist = distance_matrix(ctx, medoids)?;
        Ok(Clustering {
            medoids: medoids.to_vec(),
            axiom_ids: ctx.ids().map(str::to_string).collect(),
            assignment: hard_from_distances(&dist),
            soft: soft_from_distances(&dist, &distinct_mask(medoids), beta),
            beta,
        })
    }

    /// Axiom indices grouped by medoid.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.medoids.len()];
        for (x, &c) in self.assignment.iter().enumerate() {
            groups[c].push(x);
        }
        groups
    }

    /// `{"medoids": [...], "assignment": {id: index}, "soft": {id: [...]}, "beta": ...}`
    pub fn to_json(&self) -> Value {
        let assignment: Map<String, Value> = self
            .axiom_ids
            .iter()
            .zip(&self.assignment)
            .map(|(id, &c)| (id.clone(), json!(c)))
            .collect();
        let soft: Map<String, Value> = self
            .axiom_ids
            .iter()
            .zip(&self.soft)
            .map(|(id, row)| (id.clone(), json!(row)))
            .collect();
        json!({
            "medoids": self.medoids.iter().map(|m| m.text.as_str()).collect::<Vec<_>>(),
            "assignment": assignment,
            "soft": soft,
            "beta": self.beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::build_context;
    use crate::fixtures;

    fn unit(xs: &[f64]) -> SemanticUnit {
        SemanticUnit::new("u", EmbeddingVector::new(xs.to_vec()).unwrap(), Origin::Fixture).unwrap()
    }

    fn trusted() -> Context {
        build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap()
    }

    #[test]
    fn single_medoid_takes_everything() {
        let ctx = trusted();
        let m = SemanticUnit::embed_all(&["Paris"], &Embedder::builtin(), Origin::Fixture).unwrap();
        assert!(exemplar_cluster(&ctx, &m).unwrap().iter().all(|&c| c == 0));
        let soft = soft_assignment(&ctx, &m, 1.0).unwrap();
        assert!(soft.iter().all(|row| row == &vec![1.0]));
    }

    #[test]
    fn dense_assignment_matches_brute_force() {
        let ctx = trusted();
        let e = Embedder::builtin();
        let medoids = SemanticUnit::embed_all(fixtures::DENSE_AGREEMENT, &e, Origin::Fixture).unwrap();
        let got = exemplar_cluster(&ctx, &medoids).unwrap();
        for (x, ax) in ctx.axioms().iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (i, m) in medoids.iter().enumerate() {
                let cos = m.embedding.dot(&ax.embedding) / (m.embedding.norm() * ax.embedding.norm());
                if 1.0 - cos < best.1 {
                    best = (i, 1.0 - cos);
                }
            }
            assert_eq!(got[x], best.0, "axiom {x}");
        }
    }

    #[test]
    fn identical_medoids_tie_to_first() {
        let ctx = trusted();
        let m = SemanticUnit::embed("Paris is the capital of France", &Embedder::builtin(), Origin::Fixture).unwrap();
        let medoids = vec![m.clone(), m];
        assert!(exemplar_cluster(&ctx, &medoids).unwrap().iter().all(|&c| c == 0));
        let soft = soft_assignment(&ctx, &medoids, 1.0).unwrap();
        assert!(soft.iter().all(|row| row == &vec![1.0, 0.0]));
    }

    #[test]
    fn tiny_beta_gives_uniform_rows() {
        let ctx = trusted();
        let medoids =
            SemanticUnit::embed_all(fixtures::SPARSE_DISAGREEMENT, &Embedder::builtin(), Origin::Fixture).unwrap();
        for row in soft_assignment(&ctx, &medoids, 1e-12).unwrap() {
            assert!(row.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-9));
        }
    }

    #[test]
    fn large_beta_approaches_hard_assignment() {
        let ctx = Context::from_embeddings(vec![
            EmbeddingVector::new(vec![1.0, 0.1]).unwrap(),
            EmbeddingVector::new(vec![0.1, 1.0]).unwrap(),
            EmbeddingVector::new(vec![0.9, 0.5]).unwrap(),
        ])
        .unwrap();
        let medoids = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let hard = exemplar_cluster(&ctx, &medoids).unwrap();
        let soft = soft_assignment(&ctx, &medoids, 1e3).unwrap();
        for (row, &c) in soft.iter().zip(&hard) {
            for (i, p) in row.iter().enumerate() {
                let target = if i == c { 1.0 } else { 0.0 };
                assert!((p - target).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn soft_rows_sum_to_one_and_agree_with_hard() {
        let ctx = trusted();
        let medoids =
            SemanticUnit::embed_all(fixtures::PARTIAL_SUPPORT, &Embedder::builtin(), Origin::Fixture).unwrap();
        let c = Clustering::build(&ctx, &medoids, 1.0).unwrap();
        for (row, &a) in c.soft.iter().zip(&c.assignment) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let argmax = row
                .iter()
                .enumerate()
                .fold(0, |best, (i, p)| if *p > row[best] { i } else { best });
            assert_eq!(argmax, a);
        }
        assert_eq!(c.members().iter().map(Vec::len).sum::<usize>(), ctx.len());
        let json = c.to_json();
        assert_eq!(json["assignment"].as_object().unwrap().len(), 10);
        assert_eq!(json["medoids"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn errors() {
        let ctx = trusted();
        assert!(exemplar_cluster(&ctx, &[]).is_err());
        let m = vec![unit(&[1.0, 0.0])];
        assert!(exemplar_cluster(&ctx, &m).is_err()); // dimension mismatch
        let medoids = SemanticUnit::embed_all(&["Paris"], &Embedder::builtin(), Origin::Fixture).unwrap();
        assert!(soft_assignment(&ctx, &medoids, 0.0).is_err());
        assert!(soft_assignment(&ctx, &medoids, f64::NAN).is_err());
    }
}
