//! Semantic entropy of the context under a clustering and the surrogate
//! mutual information it induces.
//!
//! With a uniform baseline over the context, `SE(Γ) = ln |Γ|`. Given medoids,
//! each cluster's mass is the sum over its hard-assigned axioms of their soft
//! weight on that medoid; masses are renormalized and `SE(Γ|S)` is their
//! Shannon entropy. `I(S; Γ) = SE(Γ) - SE(Γ|S)`, and `SE(Γ|∅) = SE(Γ)` so
//! `I(∅; Γ) = 0`.

use serde::{Deserialize, Serialize};

use crate::cluster::{
    distance_matrix, distinct_mask, hard_from_distances, soft_from_distances, SemanticUnit,
};
use crate::context::Context;
use crate::error::{CarolError, Result};
use crate::semantics::{check_distribution, entropy_unchecked};

pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEval {
    pub se_prior: f64,
    pub se_posterior: f64,
    pub mutual_info: f64,
    /// Empty when there are no medoids.
    pub cluster_masses: Vec<f64>,
}

pub fn semantic_entropy_prior(ctx: &Context) -> Result<f64> {
    if ctx.is_empty() {
        return Err(CarolError::input("context is empty"));
    }
    Ok((ctx.len() as f64).ln())
}

pub(crate) fn masses_from_distances(dist: &[Vec<f64>], distinct: &[bool], beta: f64) -> Vec<f64> {
    let hard = hard_from_distances(dist);
    let soft = soft_from_distances(dist, distinct, beta);
    let mut masses = vec![0.0; distinct.len()];
    for (row, &c) in soft.iter().zip(&hard) {
        masses[c] += row[c];
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    masses
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CarolError::input(format!("beta must be finite and > 0, got {beta}")));
    }
    Ok(())
}

/// Normalized cluster masses, one per medoid (duplicates get 0).
pub fn cluster_masses(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let dist = distance_matrix(ctx, medoids)?;
    Ok(masses_from_distances(&dist, &distinct_mask(medoids), beta))
}

pub fn semantic_entropy_posterior(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<f64> {
    Ok(entropy_unchecked(&cluster_masses(ctx, medoids, beta)?))
}

/// `SE(Γ|S)`, falling back to the prior when `S` is empty.
fn conditional_entropy(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<f64> {
    if medoids.is_empty() {
        check_beta(beta)?;
        semantic_entropy_prior(ctx)
    } else {
        semantic_entropy_posterior(ctx, medoids, beta)
    }
}

pub fn mutual_info(ctx: &Context, medoids: &[SemanticUnit], beta: f64) -> Result<ObjectiveEval> {
    let se_prior = semantic_entropy_prior(ctx)?;
    check_beta(beta)?;
    let (se_posterior, cluster_masses) = if medoids.is_empty() {
        (se_prior, Vec::new())
    } else {
        let masses = cluster_masses(ctx, medoids, beta)?;
        (entropy_unchecked(&masses), masses)
    };
    Ok(ObjectiveEval {
        se_prior,
        se_posterior,
        mutual_info: se_prior - se_posterior,
        cluster_masses,
    })
}

/// `SE(Γ|state) - SE(Γ|state ⊕ candidate)`.
pub fn marginal_gain(
    state: &[SemanticUnit],
    candidate: &SemanticUnit,
    ctx: &Context,
    beta: f64,
) -> Result<f64> {
    let before = conditional_entropy(ctx, state, beta)?;
    let mut extended = state.to_vec();
    extended.push(candidate.clone());
    let after = conditional_entropy(ctx, &extended, beta)?;
    Ok(before - after)
}

/// Mean per-position entropy of next-token distributions.
pub fn token_entropy(distributions: &[Vec<f64>]) -> Result<f64> {
    if distributions.is_empty() {
        return Err(CarolError::input("no token distributions"));
    }
    let mut total = 0.0;
    for (i, p) in distributions.iter().enumerate() {
        check_distribution(p).map_err(|e| CarolError::input(format!("position {i}: {e}")))?;
        total += entropy_unchecked(p);
    }
    Ok(total / distributions.len() as f64)
}

/// Posterior semantic entropy scaled into `[0, 1]` by `ln(max(κ, 2))`, where
/// `κ` counts distinct response units. Higher means more hallucination risk.
pub fn hallucination_score(ctx: &Context, response: &[SemanticUnit], beta: f64) -> Result<f64> {
    if response.is_empty() {
        return Err(CarolError::input("response has no units"));
    }
    let kappa = distinct_mask(response).into_iter().filter(|&d| d).count();
    let se = semantic_entropy_posterior(ctx, response, beta)?;
    Ok((se / (kappa.max(2) as f64).ln()).clamp(0.0, 1.0))
}

/// `I(S; Γ)` for subsets of a fixed candidate pool, with distances computed once.
///
/// Subsets are given as ascending pool indices; medoid order follows pool
/// order, which fixes tie-breaking and duplicate resolution.
#[derive(Clone, Debug)]
pub struct PoolObjective {
    dist: Vec<Vec<f64>>,
    same: Vec<Vec<bool>>,
    beta: f64,
    prior: f64,
}

impl PoolObjective {
    /// Unlike the other entry points this accepts `beta == 0`, where every
    /// soft row is uniform over the distinct medoids.
    pub fn new(ctx: &Context, pool: &[SemanticUnit], beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(CarolError::input(format!("beta must be finite and >= 0, got {beta}")));
        }
        let same = pool
            .iter()
            .map(|a| pool.iter().map(|b| a.embedding.bit_eq(&b.embedding)).collect())
            .collect();
        Ok(PoolObjective {
            dist: distance_matrix(ctx, pool)?,
            same,
            beta,
            prior: semantic_entropy_prior(ctx)?,
        })
    }

    pub fn pool_len(&self) -> usize {
        self.same.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `I` of the subset; `0` for the empty subset.
    pub fn value(&self, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return 0.0;
        }
        let dist: Vec<Vec<f64>> = self
            .dist
            .iter()
            .map(|row| subset.iter().map(|&c| row[c]).collect())
            .collect();
        let distinct: Vec<bool> = subset
            .iter()
            .enumerate()
            .map(|(k, &c)| !subset[..k].iter().any(|&e| self.same[e][c]))
            .collect();
        let masses = masses_from_distances(&dist, &distinct, self.beta);
        self.prior - entropy_unchecked(&masses)
    }

    /// `I` of the subset encoded as a bitmask over pool indices.
    pub fn value_mask(&self, mask: u32) -> f64 {
        self.value(&mask_to_indices(mask, self.pool_len()))
    }

    /// `I` for every subset, indexed by bitmask. Requires `pool_len() <= 20`.
    pub fn table(&self) -> Result<Vec<f64>> {
        let n = self.pool_len();
        if n > 20 {
            return Err(CarolError::input(format!("pool of {n} is too large to tabulate")));
        }
        Ok((0..1u32 << n).map(|m| self.value_mask(m)).collect())
    }
}

pub(crate) fn mask_to_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Origin;
    use crate::context::build_context;
    use crate::embed::{Embedder, EmbeddingVector};
    use crate::fixtures;

    fn trusted() -> Context {
        build_context(fixtures::TRUSTED_CONTEXT, &Embedder::builtin()).unwrap()
    }

    fn units(texts: &[&str]) -> Vec<SemanticUnit> {
        SemanticUnit::embed_all(texts, &Embedder::builtin(), Origin::Fixture).unwrap()
    }

    fn unit(xs: &[f64]) -> SemanticUnit {
        SemanticUnit::new("u", EmbeddingVector::new(xs.to_vec()).unwrap(), Origin::Fixture).unwrap()
    }

    #[test]
    fn prior_is_log_size() {
        assert_eq!(semantic_entropy_prior(&build_context(&["x"], &Embedder::builtin()).unwrap()).unwrap(), 0.0);
        assert!((semantic_entropy_prior(&trusted()).unwrap() - 10f64.ln()).abs() < 1e-15);
        let two = build_context(&["x", "y"], &Embedder::builtin()).unwrap();
        assert!((semantic_entropy_prior(&two).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_medoid_has_zero_posterior() {
        let ctx = trusted();
        let m = units(&["Paris is the capital of France"]);
        assert_eq!(semantic_entropy_posterior(&ctx, &m, 1.0).unwrap(), 0.0);
        let eval = mutual_info(&ctx, &m, 1.0).unwrap();
        assert!((eval.mutual_info - 10f64.ln()).abs() < 1e-15);
        assert_eq!(hallucination_score(&ctx, &m, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_masses_give_log_kappa() {
        // Two axioms on each axis, medoids on the axes: equal mass per cluster.
        let ctx = Context::from_embeddings(
            [[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [0.1, 1.0]]
                .iter()
                .map(|x| EmbeddingVector::new(x.to_vec()).unwrap())
                .collect(),
        )
        .unwrap();
        let m = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        let se = semantic_entropy_posterior(&ctx, &m, 1.0).unwrap();
        assert!((se - 2f64.ln()).abs() < 1e-12);
        assert!((hallucination_score(&ctx, &m, 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_medoid_changes_nothing() {
        let ctx = trusted();
        let mut m = units(fixtures::PARTIAL_SUPPORT);
        let before = mutual_info(&ctx, &m, 1.0).unwrap();
        let dup = m[1].clone();
        assert_eq!(marginal_gain(&m, &dup, &ctx, 1.0).unwrap(), 0.0);
        m.push(dup);
        let after = mutual_info(&ctx, &m, 1.0).unwrap();
        assert_eq!(before.mutual_info, after.mutual_info);
    }

    #[test]
    fn first_gain_is_prior() {
        let ctx = trusted();
        let c = &units(&["Berlin is the capital of France"])[0];
        assert!((marginal_gain(&[], c, &ctx, 1.0).unwrap() - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_state_eval() {
        let eval = mutual_info(&trusted(), &[], 1.0).unwrap();
        assert_eq!(eval.mutual_info, 0.0);
        assert!(eval.cluster_masses.is_empty());
    }

    #[test]
    fn eval_identity_and_bounds() {
        let ctx = trusted();
        for set in [fixtures::DENSE_AGREEMENT, fixtures::PARTIAL_SUPPORT, fixtures::SPARSE_DISAGREEMENT] {
            let eval = mutual_info(&ctx, &units(set), 1.0).unwrap();
            assert!((eval.mutual_info - (eval.se_prior - eval.se_posterior)).abs() < 1e-12);
            assert!((eval.cluster_masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(eval.mutual_info <= eval.se_prior);
        }
    }

    #[test]
    fn token_entropy_cases() {
        assert_eq!(token_entropy(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 0.0);
        let u = vec![0.25; 4];
        assert!((token_entropy(&[u.clone(), u.clone()]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(token_entropy(&[vec![0.3, 0.3]]).is_err());
        assert!(token_entropy(&[]).is_err());
    }

    #[test]
    fn pool_objective_matches_direct_evaluation() {
        let ctx = trusted();
        let pool = units(&[
            "Paris is the capital of France",
            "The Eiffel Tower is located in Rome",
            "France belongs to the European Union",
            "Paris is the capital of France",
        ]);
        let obj = PoolObjective::new(&ctx, &pool, 1.5).unwrap();
        for mask in 0u32..16 {
            let idx = mask_to_indices(mask, 4);
            let medoids: Vec<SemanticUnit> = idx.iter().map(|&i| pool[i].clone()).collect();
            let direct = mutual_info(&ctx, &medoids, 1.5).unwrap().mutual_info;
            assert!((obj.value_mask(mask) - direct).abs() < 1e-12, "mask {mask}");
        }
    }
}
