//! Facility-location coverage of the context by a set of medoids.
//!
//! `f(S) = (1/|Γ|) Σ_x [ d(x, e0) - min_{s ∈ S ∪ {e0}} d(x, s) ]` where `e0` is
//! a phantom exemplar at fixed distance from every axiom. `f(∅) = 0`, and `f`
//! is monotone and submodular, so greedy selection is within `1 - 1/e` of optimal.

use super::{distance_matrix, SemanticUnit};
use crate::context::Context;
use crate::error::{CarolError, Result};

/// Strictly above the cosine-distance ceiling of 2.
pub const DEFAULT_PHANTOM_DISTANCE: f64 = 2.5;

/// Precomputed facility-location instance over a fixed candidate list.
#[derive(Clone, Debug)]
pub struct FacilityLocation {
    /// `dist[x][c]`: axiom `x` to candidate `c`.
    dist: Vec<Vec<f64>>,
    phantom: f64,
}

impl FacilityLocation {
    pub fn new(ctx: &Context, candidates: &[SemanticUnit], phantom: f64) -> Result<Self> {
        if !(phantom.is_finite() && phantom > 2.0) {
            return Err(CarolError::input(format!(
                "phantom distance must exceed 2.0, got {phantom}"
            )));
        }
        Ok(FacilityLocation {
            dist: distance_matrix(ctx, candidates)?,
            phantom,
        })
    }

    pub fn num_candidates(&self) -> usize {
        self.dist.first().map_or(0, Vec::len)
    }

    /// `f` of the candidate subset given by indices.
    pub fn value(&self, selected: &[usize]) -> f64 {
        let total: f64 = self
            .dist
            .iter()
            .map(|row| {
                let nearest = selected
                    .iter()
                    .map(|&c| row[c])
                    .fold(self.phantom, f64::min);
                self.phantom - nearest
            })
            .sum();
        total / self.dist.len() as f64
    }

    /// Greedy maximization of `f` with cardinality `k`; ties to the lowest index.
    pub fn greedy(&self, k: usize) -> Result<Vec<usize>> {
        let n = self.num_candidates();
        if k == 0 || k > n {
            return Err(CarolError::input(format!(
                "k must be in 1..={n}, got {k}"
            )));
        }
        let mut nearest = vec![self.phantom; self.dist.len()];
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for c in (0..n).filter(|c| !chosen.contains(c)) {
                let gain: f64 = self
                    .dist
                    .iter()
                    .zip(&nearest)
                    .map(|(row, &cur)| (cur - row[c]).max(0.0))
                    .sum();
                if best.map_or(true, |(_, g)| gain > g) {
                    best = Some((c, gain));
                }
            }
            let (c, _) = best.expect("k <= n leaves a candidate");
            for (row, cur) in self.dist.iter().zip(nearest.iter_mut()) {
                *cur = cur.min(row[c]);
            }
            chosen.push(c);
        }
        Ok(chosen)
    }
}

pub fn facility_location_value(ctx: &Context, selected: &[SemanticUnit], phantom: f64) -> Result<f64> {
    if ctx.is_empty() {
        return Err(CarolError::input("context is empty"));
    }
    if selected.is_empty() {
        if !(phantom.is_finite() && phantom > 2.0) {
            return Err(CarolError::input(format!(
                "phantom distance must exceed 2.0, got {phantom}"
            )));
        }
        return Ok(0.0);
    }
    let fl = FacilityLocation::new(ctx, selected, phantom)?;
    Ok(fl.value(&(0..selected.len()).collect::<Vec<_>>()))
}

pub fn greedy_medoid_indices(ctx: &Context, candidates: &[SemanticUnit], k: usize) -> Result<Vec<usize>> {
    FacilityLocation::new(ctx, candidates, DEFAULT_PHANTOM_DISTANCE)?.greedy(k)
}

pub fn greedy_medoids(ctx: &Context, candidates: &[SemanticUnit], k: usize) -> Result<Vec<SemanticUnit>> {
    Ok(greedy_medoid_indices(ctx, candidates, k)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}
