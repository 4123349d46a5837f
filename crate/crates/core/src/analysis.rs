//! Mixing-time machinery for the accept-reject chain over a finite pool.
//!
//! States are subsets of the candidate pool, encoded as bitmasks. The
//! remove-enabled ("toggle") chain picks candidate `i` with probability
//! `q_i`, then puts it in the state with probability
//! `σ(β [F(S ∪ i) - F(S \ i)])` and takes it out otherwise. That is a
//! random-scan Gibbs sampler for `p(S) ∝ exp(β F(S))`.
//!
//! Curvature is `max_{S ≠ ∅, j} Σ_{i ≠ j} tanh(β/2 · |Δ(i|S) - Δ(i|S ∪ j)|)`
//! with the append gain `Δ(i|S) = F(S ∪ i) - F(S)`. The query-only state
//! `S = ∅` is excluded from the maximum: there every candidate gains exactly
//! `ln |Γ|`, which pushes the sum past `(n - 1) tanh(β ln|Γ| / 2)` for any
//! non-degenerate pool. [`Curvature::with_empty_state`] reports the value
//! with it included.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::error::{CarolError, Result};
use crate::objective::PoolObjective;
use crate::proposal::{q_extremes, CandidatePool};
use crate::rng;

pub const MAX_ENUMERABLE_POOL: usize = 12;
/// Start states are enumerated exhaustively up to this pool size.
pub const MAX_EXHAUSTIVE_STARTS: usize = 8;
const SAMPLED_STARTS: usize = 32;

fn check_enumerable(n: usize) -> Result<()> {
    if n == 0 {
        return Err(CarolError::input("candidate pool is empty"));
    }
    if n > MAX_ENUMERABLE_POOL {
        return Err(CarolError::input(format!(
            "pool of {n} candidates exceeds the enumeration limit of {MAX_ENUMERABLE_POOL}"
        )));
    }
    Ok(())
}

/// Which closed form of the mixing bound to use. The theorem statement carries
/// a leading factor `n`; the end of the path-coupling derivation does not.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundForm {
    #[default]
    Theorem,
    Appendix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub gamma_bar: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub n: usize,
    pub epsilon: f64,
    pub bound_form: BoundForm,
    pub denominator_positive: bool,
    pub tau_theorem: Option<f64>,
    /// The bound under the other [`BoundForm`], for comparison.
    pub tau_other_form: Option<f64>,
    pub empirical_tmix: Option<u64>,
    /// Worst-case total variation at checkpoint steps.
    pub tv_curve: Vec<(u64, f64)>,
    /// Curvature with the empty state included in the maximum.
    pub gamma_with_empty: Option<f64>,
    pub simulated_tmix: Option<u64>,
    pub simulated_tv_curve: Vec<(u64, f64)>,
    pub worst_start: Option<u32>,
    pub notes: Vec<String>,
}

fn tau_for(form: BoundForm, n: usize, epsilon: f64, denom: f64) -> f64 {
    let log_term = (n as f64).ln() + (1.0 / epsilon).ln();
    match form {
        BoundForm::Theorem => n as f64 * log_term / denom,
        BoundForm::Appendix => log_term / denom,
    }
}

/// Closed-form mixing bound. The bound exists only when
/// `q_min - q_max * gamma_bar > 0`.
pub fn mixing_bound(
    gamma_bar: f64,
    q_min: f64,
    q_max: f64,
    n: usize,
    epsilon: f64,
    form: BoundForm,
) -> Result<MixingReport> {
    if !(gamma_bar.is_finite() && gamma_bar >= 0.0) {
        return Err(CarolError::input(format!("gamma_bar must be finite and >= 0, got {gamma_bar}")));
    }
    if !(q_min > 0.0 && q_min <= q_max && q_max <= 1.0) {
        return Err(CarolError::input(format!(
            "need 0 < q_min <= q_max <= 1, got q_min={q_min}, q_max={q_max}"
        )));
    }
    if n == 0 {
        return Err(CarolError::input("n must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CarolError::input(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let denom = q_min - q_max * gamma_bar;
    let denominator_positive = denom > 0.0;
    let other = match form {
        BoundForm::Theorem => BoundForm::Appendix,
        BoundForm::Appendix => BoundForm::Theorem,
    };
    let mut notes = vec![format!(
        "bound form {form:?}; the {other:?} form differs by a factor of n = {n}"
    )];
    if !denominator_positive {
        notes.push(format!(
            "q_min - q_max * gamma_bar = {denom:.6} <= 0: the path-coupling bound is vacuous"
        ));
    }
    Ok(MixingReport {
        gamma_bar,
        q_min,
        q_max,
        n,
        epsilon,
        bound_form: form,
        denominator_positive,
        tau_theorem: denominator_positive.then(|| tau_for(form, n, epsilon, denom)),
        tau_other_form: denominator_positive.then(|| tau_for(other, n, epsilon, denom)),
        empirical_tmix: None,
        tv_curve: Vec::new(),
        gamma_with_empty: None,
        simulated_tmix: None,
        simulated_tv_curve: Vec::new(),
        worst_start: None,
        notes,
    })
}

/// Curvature under a uniform perturbation of the objective by at most `eta_gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustBoundInput {
    pub gamma_star: f64,
    pub beta: f64,
    /// Number of candidates in the curvature sum.
    pub m: usize,
    pub eta_gamma: f64,
}

impl RobustBoundInput {
    pub fn effective_gamma(&self) -> f64 {
        self.gamma_star + 2.0 * self.beta * self.m as f64 * self.eta_gamma
    }
}

pub fn robust_mixing_bound(
    input: &RobustBoundInput,
    q_min: f64,
    q_max: f64,
    n: usize,
    epsilon: f64,
    form: BoundForm,
) -> Result<MixingReport> {
    let finite = [input.gamma_star, input.beta, input.eta_gamma]
        .iter()
        .all(|x| x.is_finite());
    if !finite || input.eta_gamma < 0.0 || input.m == 0 {
        return Err(CarolError::input(format!("invalid robust-bound input {input:?}")));
    }
    let mut report = mixing_bound(input.effective_gamma(), q_min, q_max, n, epsilon, form)?;
    if input.eta_gamma > 0.0 {
        report.notes.push(format!(
            "curvature inflated from {} by 2*beta*m*eta = {}",
            input.gamma_star,
            2.0 * input.beta * input.m as f64 * input.eta_gamma
        ));
    }
    Ok(report)
}

/// Curvature values for a tabulated objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub value: f64,
    pub with_empty_state: f64,
}

/// Curvature of `F` given as a table over all `2^n` subsets.
pub fn curvature_from_table(table: &[f64], n: usize, beta: f64) -> Curvature {
    assert_eq!(table.len(), 1 << n, "table must cover all subsets");
    if beta == 0.0 {
        return Curvature {
            value: 0.0,
            with_empty_state: 0.0,
        };
    }
    let gain = |i: usize, s: usize| table[s | (1 << i)] - table[s];
    let mut value = 0.0f64;
    let mut with_empty = 0.0f64;
    for s in 0..table.len() {
        for j in 0..n {
            let sj = s | (1 << j);
            let total: f64 = (0..n)
                .filter(|&i| i != j)
                .map(|i| (beta / 2.0 * (gain(i, s) - gain(i, sj)).abs()).tanh())
                .sum();
            with_empty = with_empty.max(total);
            if s != 0 {
                value = value.max(total);
            }
        }
    }
    Curvature {
        value,
        with_empty_state: with_empty,
    }
}

fn pool_table(ctx: &Context, pool: &CandidatePool, beta: f64) -> Result<Vec<f64>> {
    check_enumerable(pool.len())?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(CarolError::input(format!("beta must be finite and >= 0, got {beta}")));
    }
    PoolObjective::new(ctx, pool.candidates(), beta)?.table()
}

pub fn curvature(ctx: &Context, pool: &CandidatePool, beta: f64) -> Result<f64> {
    Ok(curvature_full(ctx, pool, beta)?.value)
}

pub fn curvature_full(ctx: &Context, pool: &CandidatePool, beta: f64) -> Result<Curvature> {
    let table = pool_table(ctx, pool, beta)?;
    Ok(curvature_from_table(&table, pool.len(), beta))
}

/// `exp(β F(S)) / Z` for every subset, indexed by bitmask.
pub fn stationary_from_table(table: &[f64], beta: f64) -> Vec<f64> {
    let max = table.iter().map(|f| beta * f).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = table.iter().map(|f| (beta * f - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

pub fn enumerate_stationary(ctx: &Context, pool: &CandidatePool, beta: f64) -> Result<Vec<f64>> {
    Ok(stationary_from_table(&pool_table(ctx, pool, beta)?, beta))
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Logistic `exp(x) / (1 + exp(x))` without overflow.
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// The remove-enabled Gibbs kernel over pool subsets.
#[derive(Clone, Debug)]
pub struct ToggleKernel {
    table: Vec<f64>,
    weights: Vec<f64>,
    q: Vec<f64>,
    beta: f64,
    n: usize,
}

impl ToggleKernel {
    /// `weights` are positive proposal weights, normalized internally.
    pub fn new(table: Vec<f64>, weights: Vec<f64>, beta: f64) -> Result<Self> {
        let n = weights.len();
        check_enumerable(n)?;
        if table.len() != 1 << n {
            return Err(CarolError::input("objective table does not match pool size"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(CarolError::input("proposal weights must be finite and positive"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(CarolError::input(format!("beta must be finite and >= 0, got {beta}")));
        }
        let total: f64 = weights.iter().sum();
        let q = weights.iter().map(|w| w / total).collect();
        Ok(ToggleKernel { table, weights, q, beta, n })
    }

    pub fn from_pool(ctx: &Context, pool: &CandidatePool, beta: f64) -> Result<Self> {
        ToggleKernel::new(pool_table(ctx, pool, beta)?, pool.weights().to_vec(), beta)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn stationary(&self) -> Vec<f64> {
        stationary_from_table(&self.table, self.beta)
    }

    /// Add/remove marginal `F(S ∪ i) - F(S \ i)`.
    pub fn delta(&self, state: u32, i: usize) -> f64 {
        let bit = 1u32 << i;
        self.table[(state | bit) as usize] - self.table[(state & !bit) as usize]
    }

    pub fn p_add(&self, state: u32, i: usize) -> f64 {
        logistic(self.beta * self.delta(state, i))
    }

    /// One transition given the drawn candidate and uniform `z`.
    pub fn apply(&self, state: u32, i: usize, z: f64) -> u32 {
        if z <= self.p_add(state, i) {
            state | (1 << i)
        } else {
            state & !(1 << i)
        }
    }

    /// Distribution after one step from distribution `dist`.
    pub fn evolve(&self, dist: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; dist.len()];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for i in 0..self.n {
                let p = self.p_add(s as u32, i);
                let bit = 1usize << i;
                next[s | bit] += mass * self.q[i] * p;
                next[s & !bit] += mass * self.q[i] * (1.0 - p);
            }
        }
        next
    }

    /// Runs `replicas` independent chains for `steps` steps from `start` and
    /// returns the empirical distribution of final states. Replica `r` uses
    /// seed `seed + r` with the same stream layout as a single chain run.
    pub fn simulate(&self, start: u32, steps: u64, replicas: usize, seed: u64) -> Vec<f64> {
        let mut counts = vec![0usize; self.table.len()];
        for r in 0..replicas {
            let s = self.run_one(start, steps, seed.wrapping_add(r as u64));
            counts[s as usize] += 1;
        }
        counts.into_iter().map(|c| c as f64 / replicas as f64).collect()
    }

    /// Final state of one chain. Draws match a toggle-mode chain run with the same seed.
    pub fn run_one(&self, start: u32, steps: u64, seed: u64) -> u32 {
        let sampler = WeightedIndex::new(&self.weights).expect("validated weights");
        let mut prop_rng = rng::stream(seed, rng::PROPOSAL_STREAM);
        let mut z_rng = rng::stream(seed, rng::ACCEPTANCE_STREAM);
        let mut s = start;
        for _ in 0..steps {
            let i = sampler.sample(&mut prop_rng);
            let z: f64 = z_rng.gen();
            s = self.apply(s, i, z);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMixing {
    /// First step at which the exact worst-case TV is at most epsilon.
    pub tmix: Option<u64>,
    pub tv_curve: Vec<(u64, f64)>,
    pub worst_start: u32,
    /// Replica-based estimates from the worst start (plug-in TV, biased upward).
    pub simulated_tmix: Option<u64>,
    pub simulated_tv_curve: Vec<(u64, f64)>,
}

fn is_checkpoint(t: u64) -> bool {
    t == 0 || t.is_power_of_two()
}

/// Worst-case mixing of the toggle chain.
///
/// Distributions from each start are propagated exactly through the kernel
/// (all `2^n` starts for `n <= 8`, otherwise 32 seeded random starts); the
/// exact worst-case TV gives `tmix` and `tv_curve` at checkpoints 0, 1, 2, 4, ...
/// The start that mixes last is then simulated with `replicas` chains to give
/// the plug-in estimate.
pub fn empirical_mixing_kernel(
    kernel: &ToggleKernel,
    epsilon: f64,
    max_steps: u64,
    replicas: usize,
    seed: u64,
) -> Result<EmpiricalMixing> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CarolError::input(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if replicas == 0 {
        return Err(CarolError::input("replicas must be at least 1"));
    }
    let size = 1usize << kernel.n;
    let pi = kernel.stationary();
    let starts: Vec<u32> = if kernel.n <= MAX_EXHAUSTIVE_STARTS {
        (0..size as u32).collect()
    } else {
        let mut r = rng::stream(seed, 7);
        (0..SAMPLED_STARTS).map(|_| r.gen_range(0..size as u32)).collect()
    };
    let mut dists: Vec<Vec<f64>> = starts
        .iter()
        .map(|&s| {
            let mut d = vec![0.0; size];
            d[s as usize] = 1.0;
            d
        })
        .collect();

    let worst = |dists: &[Vec<f64>]| -> (usize, f64) {
        dists
            .iter()
            .map(|d| total_variation(d, &pi))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, tv)| if tv > acc.1 { (k, tv) } else { acc })
    };

    let mut tv_curve = Vec::new();
    let mut tmix = None;
    let (mut worst_idx, tv0) = worst(&dists);
    tv_curve.push((0, tv0));
    if tv0 <= epsilon {
        tmix = Some(0);
    }
    let mut t = 0u64;
    while t < max_steps {
        if tmix.is_some() && is_checkpoint(t) {
            break;
        }
        let prev_worst = worst_idx;
        dists = dists.iter().map(|d| kernel.evolve(d)).collect();
        t += 1;
        let (idx, tv) = worst(&dists);
        if tmix.is_none() {
            // Keep the start that was worst just before mixing.
            worst_idx = if tv <= epsilon { prev_worst } else { idx };
            if tv <= epsilon {
                tmix = Some(t);
            }
        }
        if is_checkpoint(t) {
            tv_curve.push((t, tv));
        }
    }
    let worst_start = starts[worst_idx];

    let mut simulated_tv_curve = Vec::new();
    let mut simulated_tmix = None;
    let last = tv_curve.last().map_or(0, |&(s, _)| s);
    for &(step, _) in &tv_curve {
        let emp = kernel.simulate(worst_start, step, replicas, seed);
        let tv = total_variation(&emp, &pi);
        simulated_tv_curve.push((step, tv));
        if simulated_tmix.is_none() && tv <= epsilon {
            simulated_tmix = Some(step);
        }
        if step >= last {
            break;
        }
    }

    Ok(EmpiricalMixing {
        tmix,
        tv_curve,
        worst_start,
        simulated_tmix,
        simulated_tv_curve,
    })
}

pub fn empirical_mixing(
    ctx: &Context,
    pool: &CandidatePool,
    beta: f64,
    epsilon: f64,
    max_steps: u64,
    replicas: usize,
    seed: u64,
) -> Result<EmpiricalMixing> {
    let kernel = ToggleKernel::from_pool(ctx, pool, beta)?;
    empirical_mixing_kernel(&kernel, epsilon, max_steps, replicas, seed)
}

/// Options for [`analyze_pool`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Inverse temperature for analysis; falls back to the chain's. Zero is allowed here.
    pub beta: Option<f64>,
    pub epsilon: f64,
    pub max_steps: u64,
    pub replicas: usize,
    pub seed: u64,
    pub bound_form: BoundForm,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            beta: None,
            epsilon: 0.05,
            max_steps: 4096,
            replicas: 1000,
            seed: 0,
            bound_form: BoundForm::Theorem,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| CarolError::Config {
            key: format!("analysis.{key}"),
            message,
        };
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.replicas == 0 {
            return Err(bad("replicas", "must be at least 1".into()));
        }
        if let Some(beta) = self.beta {
            if !(beta.is_finite() && beta >= 0.0) {
                return Err(bad("beta", format!("must be finite and >= 0, got {beta}")));
            }
        }
        Ok(())
    }
}

/// Theoretical bound for a pool: curvature, proposal extremes and `n = |pool|`.
pub fn theorem_bound(
    ctx: &Context,
    pool: &CandidatePool,
    beta: f64,
    epsilon: f64,
    form: BoundForm,
) -> Result<MixingReport> {
    let c = curvature_full(ctx, pool, beta)?;
    let q = q_extremes(pool);
    let mut report = mixing_bound(c.value, q.q_min, q.q_max, pool.len(), epsilon, form)?;
    report.gamma_with_empty = Some(c.with_empty_state);
    Ok(report)
}

/// Curvature, bound, stationary distribution and empirical mixing in one report.
pub fn analyze_pool(
    ctx: &Context,
    pool: &CandidatePool,
    beta: f64,
    cfg: &AnalysisConfig,
) -> Result<MixingReport> {
    cfg.validate()?;
    let kernel = ToggleKernel::from_pool(ctx, pool, beta)?;
    let c = curvature_from_table(kernel.table(), kernel.n(), beta);
    let q = q_extremes(pool);
    let mut report = mixing_bound(c.value, q.q_min, q.q_max, pool.len(), cfg.epsilon, cfg.bound_form)?;
    report.gamma_with_empty = Some(c.with_empty_state);
    let emp = empirical_mixing_kernel(&kernel, cfg.epsilon, cfg.max_steps, cfg.replicas, cfg.seed)?;
    if emp.tmix.is_none() {
        report.notes.push(format!("chain did not reach epsilon within {} steps", cfg.max_steps));
    }
    report.empirical_tmix = emp.tmix;
    report.tv_curve = emp.tv_curve;
    report.simulated_tmix = emp.simulated_tmix;
    report.simulated_tv_curve = emp.simulated_tv_curve;
    report.worst_start = Some(emp.worst_start);
    Ok(report)
}
