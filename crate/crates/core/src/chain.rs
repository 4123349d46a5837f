//! The accept-reject chain that assembles a response unit by unit.
//!
//! Each step draws a unit from the proposal, scores its marginal information
//! gain against the context, and keeps it with probability
//! `exp(βΔF) / (1 + exp(βΔF))`. A rejection leaves the accepted units alone
//! and appends a revision directive that the next proposal sees.
//!
//! [`ChainMode::Toggle`] is the remove-enabled variant used to study the
//! stationary distribution: the drawn pool candidate is switched in or out
//! of the state using the add/remove marginal.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, logistic, BoundForm, MixingReport, ToggleKernel};
use crate::cluster::{distinct_mask, Origin, SemanticUnit};
use crate::context::Context;
use crate::error::{CarolError, Result};
use crate::objective::{masses_from_distances, mutual_info, semantic_entropy_prior, ObjectiveEval, PoolObjective};
use crate::proposal::{CandidatePool, Proposal, DEFAULT_REVISION_DIRECTIVE};
use crate::rng;
use crate::semantics::{entailment_distance, entropy_unchecked};

/// `exp(βΔF) / (1 + exp(βΔF))`, stable for any finite input.
pub fn gibbs_accept_probability(delta_f: f64, beta: f64) -> f64 {
    logistic(beta * delta_f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub query: String,
    pub accepted: Vec<SemanticUnit>,
    pub revisions: Vec<String>,
    pub step: u64,
}

impl ChainState {
    pub fn new(query: impl Into<String>) -> Self {
        ChainState {
            query: query.into(),
            accepted: Vec::new(),
            revisions: Vec::new(),
            step: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainMode {
    #[default]
    AppendOnly,
    Toggle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub beta: f64,
    pub t_max: u64,
    /// Accuracy used when the step budget comes from the mixing bound.
    pub epsilon: f64,
    pub tau_override: Option<u64>,
    pub seed: u64,
    pub mode: ChainMode,
    pub revision_directive: String,
    pub bound_form: BoundForm,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            beta: 1.0,
            t_max: 64,
            epsilon: 0.05,
            tau_override: None,
            seed: 0,
            mode: ChainMode::AppendOnly,
            revision_directive: DEFAULT_REVISION_DIRECTIVE.to_string(),
            bound_form: BoundForm::Theorem,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| CarolError::Config {
            key: format!("chain.{key}"),
            message,
        };
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(bad("beta", format!("must be finite and > 0, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(bad("epsilon", format!("must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.tau_override == Some(0) {
            return Err(bad("tau_override", "must be positive when set".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub candidate: String,
    pub pool_index: Option<usize>,
    pub delta_f: f64,
    pub p_add: f64,
    pub z: f64,
    /// Append mode: the unit was appended. Toggle mode: the unit is in the
    /// state after the step.
    pub accepted: bool,
    pub revision_applied: Option<String>,
}

/// Where the step budget came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepBudgetSource {
    Override,
    Theorem,
    /// The bound was unavailable or vacuous.
    TMaxFallback,
    TMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub steps: u64,
    pub source: StepBudgetSource,
    pub tau: Option<f64>,
    pub bound: Option<MixingReport>,
}

#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub response: Vec<SemanticUnit>,
    pub trace: Vec<StepRecord>,
    pub final_eval: ObjectiveEval,
    pub state: ChainState,
    pub budget: StepBudget,
}

/// A chain that stopped early; `trace` holds every completed step.
#[derive(Debug)]
pub struct ChainFailure {
    pub error: CarolError,
    pub trace: Vec<StepRecord>,
}

impl std::fmt::Display for ChainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "chain failed after {} steps: {}", self.trace.len(), self.error)
    }
}

impl std::error::Error for ChainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<ChainFailure> for CarolError {
    fn from(f: ChainFailure) -> Self {
        f.error
    }
}

fn step_budget(ctx: &Context, pool: Option<&CandidatePool>, cfg: &ChainConfig) -> StepBudget {
    if let Some(tau) = cfg.tau_override {
        return StepBudget {
            steps: tau.min(cfg.t_max),
            source: StepBudgetSource::Override,
            tau: Some(tau as f64),
            bound: None,
        };
    }
    let Some(pool) = pool else {
        return StepBudget {
            steps: cfg.t_max,
            source: StepBudgetSource::TMax,
            tau: None,
            bound: None,
        };
    };
    match analysis::theorem_bound(ctx, pool, cfg.beta, cfg.epsilon, cfg.bound_form) {
        Ok(report) => match report.tau_theorem {
            Some(tau) => StepBudget {
                steps: (tau.ceil() as u64).min(cfg.t_max),
                source: StepBudgetSource::Theorem,
                tau: Some(tau),
                bound: Some(report),
            },
            None => {
                warn!(
                    "mixing bound is vacuous (curvature {:.4}); running t_max = {} steps",
                    report.gamma_bar, cfg.t_max
                );
                StepBudget {
                    steps: cfg.t_max,
                    source: StepBudgetSource::TMaxFallback,
                    tau: None,
                    bound: Some(report),
                }
            }
        },
        Err(e) => {
            warn!("mixing bound unavailable ({e}); running t_max = {} steps", cfg.t_max);
            StepBudget {
                steps: cfg.t_max,
                source: StepBudgetSource::TMaxFallback,
                tau: None,
                bound: None,
            }
        }
    }
}

/// Conditional entropy of the context given a growing medoid list, keeping
/// the distance matrix between steps.
struct AppendScorer<'a> {
    ctx: &'a Context,
    beta: f64,
    prior: f64,
    dist: Vec<Vec<f64>>,
    medoids: Vec<SemanticUnit>,
    entropy: f64,
}

impl<'a> AppendScorer<'a> {
    fn new(ctx: &'a Context, beta: f64) -> Result<Self> {
        let prior = semantic_entropy_prior(ctx)?;
        Ok(AppendScorer {
            ctx,
            beta,
            prior,
            dist: vec![Vec::new(); ctx.len()],
            medoids: Vec::new(),
            entropy: prior,
        })
    }

    fn entropy_with(&mut self, unit: &SemanticUnit) -> Result<f64> {
        for (row, ax) in self.dist.iter_mut().zip(self.ctx.axioms()) {
            row.push(entailment_distance(&unit.embedding, &ax.embedding)?);
        }
        self.medoids.push(unit.clone());
        let masses = masses_from_distances(&self.dist, &distinct_mask(&self.medoids), self.beta);
        self.medoids.pop();
        self.dist.iter_mut().for_each(|row| {
            row.pop();
        });
        Ok(entropy_unchecked(&masses))
    }

    /// `SE(Γ|S) - SE(Γ|S ⊕ unit)` and the entropy after appending.
    fn gain(&mut self, unit: &SemanticUnit) -> Result<(f64, f64)> {
        let after = self.entropy_with(unit)?;
        Ok((self.entropy - after, after))
    }

    fn push(&mut self, unit: SemanticUnit, entropy: f64) {
        for (row, ax) in self.dist.iter_mut().zip(self.ctx.axioms()) {
            row.push(entailment_distance(&unit.embedding, &ax.embedding).expect("checked in gain"));
        }
        self.medoids.push(unit);
        self.entropy = entropy;
    }

    fn eval(&self) -> ObjectiveEval {
        ObjectiveEval {
            se_prior: self.prior,
            se_posterior: self.entropy,
            mutual_info: self.prior - self.entropy,
            cluster_masses: if self.medoids.is_empty() {
                Vec::new()
            } else {
                masses_from_distances(&self.dist, &distinct_mask(&self.medoids), self.beta)
            },
        }
    }
}

/// Runs the chain for `min(t_max, τ)` steps.
///
/// `τ` is `tau_override` when set, else the mixing bound when the proposal
/// exposes a pool of at most 12 candidates, else `t_max`.
pub fn run_chain(
    query: &str,
    ctx: &Context,
    proposal: &mut dyn Proposal,
    cfg: &ChainConfig,
) -> std::result::Result<ChainOutcome, ChainFailure> {
    let fail = |error| ChainFailure { error, trace: Vec::new() };
    cfg.validate().map_err(fail)?;
    if ctx.is_empty() {
        return Err(fail(CarolError::input("context is empty")));
    }
    let budget = step_budget(ctx, proposal.pool(), cfg);
    match cfg.mode {
        ChainMode::AppendOnly => run_append(query, ctx, proposal, cfg, budget),
        ChainMode::Toggle => run_toggle(query, ctx, proposal, cfg, budget),
    }
}

fn run_append(
    query: &str,
    ctx: &Context,
    proposal: &mut dyn Proposal,
    cfg: &ChainConfig,
    budget: StepBudget,
) -> std::result::Result<ChainOutcome, ChainFailure> {
    let mut state = ChainState::new(query);
    let mut trace = Vec::new();
    let mut z_rng = rng::stream(cfg.seed, rng::ACCEPTANCE_STREAM);
    let mut scorer = AppendScorer::new(ctx, cfg.beta).map_err(|error| ChainFailure { error, trace: Vec::new() })?;

    for t in 1..=budget.steps {
        let proposed = match proposal.propose(&state) {
            Ok(p) => p,
            Err(error) => return Err(ChainFailure { error, trace }),
        };
        let (delta_f, after) = match scorer.gain(&proposed.unit) {
            Ok(g) => g,
            Err(error) => return Err(ChainFailure { error, trace }),
        };
        let p_add = gibbs_accept_probability(delta_f, cfg.beta);
        let z: f64 = z_rng.gen();
        let accepted = z <= p_add;
        let mut revision_applied = None;
        if accepted {
            let mut unit = proposed.unit.clone();
            unit.origin = Origin::Accepted;
            scorer.push(unit.clone(), after);
            state.accepted.push(unit);
        } else {
            state.revisions.push(cfg.revision_directive.clone());
            revision_applied = Some(cfg.revision_directive.clone());
        }
        state.step = t;
        trace.push(StepRecord {
            step: t,
            candidate: proposed.unit.text,
            pool_index: proposed.pool_index,
            delta_f,
            p_add,
            z,
            accepted,
            revision_applied,
        });
    }

    Ok(ChainOutcome {
        response: state.accepted.clone(),
        final_eval: scorer.eval(),
        trace,
        state,
        budget,
    })
}

fn run_toggle(
    query: &str,
    ctx: &Context,
    proposal: &mut dyn Proposal,
    cfg: &ChainConfig,
    budget: StepBudget,
) -> std::result::Result<ChainOutcome, ChainFailure> {
    let fail = |error| ChainFailure { error, trace: Vec::new() };
    let pool = proposal
        .pool()
        .cloned()
        .ok_or_else(|| fail(CarolError::input("toggle mode needs a proposal with a finite pool")))?;
    let kernel = ToggleKernel::from_pool(ctx, &pool, cfg.beta).map_err(fail)?;
    let mut state = ChainState::new(query);
    let mut mask = 0u32;
    let mut trace = Vec::new();
    let mut z_rng = rng::stream(cfg.seed, rng::ACCEPTANCE_STREAM);

    for t in 1..=budget.steps {
        let proposed = match proposal.propose(&state) {
            Ok(p) => p,
            Err(error) => return Err(ChainFailure { error, trace }),
        };
        let Some(i) = proposed.pool_index else {
            let error = CarolError::input("toggle mode needs pool-indexed proposals");
            return Err(ChainFailure { error, trace });
        };
        let delta_f = kernel.delta(mask, i);
        let p_add = kernel.p_add(mask, i);
        let z: f64 = z_rng.gen();
        mask = kernel.apply(mask, i, z);
        let accepted = mask & (1 << i) != 0;
        state.accepted = members(&pool, mask);
        state.step = t;
        trace.push(StepRecord {
            step: t,
            candidate: proposed.unit.text,
            pool_index: Some(i),
            delta_f,
            p_add,
            z,
            accepted,
            revision_applied: None,
        });
    }

    let final_eval = if mask == 0 {
        mutual_info(ctx, &[], cfg.beta)
    } else {
        mutual_info(ctx, &state.accepted, cfg.beta)
    }
    .map_err(|error| ChainFailure { error, trace: trace.clone() })?;
    Ok(ChainOutcome {
        response: state.accepted.clone(),
        trace,
        final_eval,
        state,
        budget,
    })
}

fn members(pool: &CandidatePool, mask: u32) -> Vec<SemanticUnit> {
    pool.candidates()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, u)| {
            let mut u = u.clone();
            u.origin = Origin::Accepted;
            u
        })
        .collect()
}

/// Writes one JSON object per step.
pub fn write_trace(trace: &[StepRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CarolError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in trace {
        let line = serde_json::to_string(record).expect("step records serialize");
        writeln!(out, "{line}").map_err(|e| CarolError::io(path, e))?;
    }
    out.flush().map_err(|e| CarolError::io(path, e))
}

pub const MAX_SUBMODULARITY_POOL: usize = 8;

/// A prefix pair where appending `candidate` gains more after the longer prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmodularityViolation {
    pub prefix: Vec<usize>,
    pub extension: Vec<usize>,
    pub candidate: usize,
    pub gain_prefix: f64,
    pub gain_extension: f64,
    /// `gain_prefix - gain_extension`; negative for a violation.
    pub slack: f64,
}

const SUBMODULARITY_TOLERANCE: f64 = 1e-12;

/// Every `(S1, S2, s)` with `S1` a proper prefix of `S2`, both sequences of
/// distinct pool indices, where `F(S1 ⊕ s) - F(S1) < F(S2 ⊕ s) - F(S2)`.
pub fn check_string_submodularity(
    ctx: &Context,
    pool: &CandidatePool,
    beta: f64,
) -> Result<Vec<SubmodularityViolation>> {
    let n = pool.len();
    if n > MAX_SUBMODULARITY_POOL {
        return Err(CarolError::input(format!(
            "pool of {n} exceeds the limit of {MAX_SUBMODULARITY_POOL} for prefix enumeration"
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(CarolError::input(format!("beta must be finite and > 0, got {beta}")));
    }
    let objective = PoolObjective::new(ctx, pool.candidates(), beta)?;
    let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut f = |seq: &[usize]| -> f64 {
        *memo.entry(seq.to_vec()).or_insert_with(|| objective.value(seq))
    };

    let mut violations = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(seq) = stack.pop() {
        for next in (0..n).rev().filter(|i| !seq.contains(i)) {
            let mut longer = seq.clone();
            longer.push(next);
            stack.push(longer);
        }
        if seq.is_empty() {
            continue;
        }
        let f2 = f(&seq);
        for cut in 0..seq.len() {
            let prefix = &seq[..cut];
            let f1 = f(prefix);
            for s in 0..n {
                let mut a = prefix.to_vec();
                a.push(s);
                let mut b = seq.clone();
                b.push(s);
                let gain_prefix = f(&a) - f1;
                let gain_extension = f(&b) - f2;
                let slack = gain_prefix - gain_extension;
                if slack < -SUBMODULARITY_TOLERANCE {
                    violations.push(SubmodularityViolation {
                        prefix: prefix.to_vec(),
                        extension: seq.clone(),
                        candidate: s,
                        gain_prefix,
                        gain_extension,
                        slack,
                    });
                }
            }
        }
    }
    Ok(violations)
}
