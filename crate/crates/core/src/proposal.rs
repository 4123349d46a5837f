//! Proposal distributions over response units.
//!
//! [`MockProposal`] draws from a finite weighted [`CandidatePool`] with a
//! seeded generator; [`ChatProposal`] asks a chat-completions endpoint for the
//! next statement and truncates the reply to `max_unit_tokens` words.

use std::env;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Duration;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::ChainState;
use crate::cluster::{Origin, SemanticUnit};
use crate::embed::Embedder;
use crate::error::{CarolError, Result};
use crate::http;
use crate::rng::{self, ChainRng};

pub const DEFAULT_REVISION_DIRECTIVE: &str =
    "Revise the previous statement as it is not contrasted.";

const DEFAULT_SYSTEM_PROMPT: &str = "Answer the question one short factual statement at a time. \
Reply with exactly one new statement that is consistent with the statements already given.";

/// The finite set of admissible units with positive proposal weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePool {
    candidates: Vec<SemanticUnit>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct PoolLine {
    text: String,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

impl CandidatePool {
    pub fn new(candidates: Vec<SemanticUnit>, weights: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(CarolError::input("candidate pool is empty"));
        }
        if candidates.len() != weights.len() {
            return Err(CarolError::input(format!(
                "{} candidates but {} weights",
                candidates.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(CarolError::input(format!("pool weight {w} is not finite and positive")));
        }
        Ok(CandidatePool { candidates, weights })
    }

    pub fn uniform(candidates: Vec<SemanticUnit>) -> Result<Self> {
        let weights = vec![1.0; candidates.len()];
        CandidatePool::new(candidates, weights)
    }

    pub fn from_texts<S: AsRef<str>>(texts: &[S], weights: Vec<f64>, embedder: &Embedder) -> Result<Self> {
        CandidatePool::new(SemanticUnit::embed_all(texts, embedder, Origin::Proposed)?, weights)
    }

    /// Reads a JSONL pool file: one `{"text": ..., "weight": ...}` per line,
    /// `weight` defaulting to 1.
    pub fn load(path: &Path, embedder: &Embedder) -> Result<Self> {
        let file = File::open(path).map_err(|e| CarolError::io(path, e))?;
        let mut texts = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| CarolError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: PoolLine = serde_json::from_str(&line).map_err(|e| CarolError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            texts.push(parsed.text);
            weights.push(parsed.weight);
        }
        CandidatePool::from_texts(&texts, weights, embedder)
    }

    pub fn candidates(&self) -> &[SemanticUnit] {
        &self.candidates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Normalized proposal probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QExtremes {
    pub q_min: f64,
    pub q_max: f64,
}

pub fn q_extremes(pool: &CandidatePool) -> QExtremes {
    let p = pool.probabilities();
    QExtremes {
        q_min: p.iter().copied().fold(f64::INFINITY, f64::min),
        q_max: p.iter().copied().fold(0.0, f64::max),
    }
}

/// A proposed unit plus its pool position when it came from a pool.
#[derive(Clone, Debug)]
pub struct Proposed {
    pub unit: SemanticUnit,
    pub pool_index: Option<usize>,
}

pub trait Proposal: Send {
    fn propose(&mut self, state: &ChainState) -> Result<Proposed>;

    /// The candidate pool, when the proposal is an explicit finite distribution.
    fn pool(&self) -> Option<&CandidatePool> {
        None
    }
}

pub struct MockProposal {
    pool: CandidatePool,
    sampler: WeightedIndex<f64>,
    rng: ChainRng,
}

impl MockProposal {
    pub fn new(pool: CandidatePool, seed: u64) -> Self {
        MockProposal::with_rng(pool, rng::stream(seed, rng::PROPOSAL_STREAM))
    }

    pub fn with_rng(pool: CandidatePool, rng: ChainRng) -> Self {
        let sampler = WeightedIndex::new(pool.weights()).expect("pool weights validated");
        MockProposal { pool, sampler, rng }
    }

    pub fn draw_index(&mut self) -> usize {
        self.sampler.sample(&mut self.rng)
    }
}

impl Proposal for MockProposal {
    fn propose(&mut self, _state: &ChainState) -> Result<Proposed> {
        let i = self.draw_index();
        Ok(Proposed {
            unit: self.pool.candidates[i].clone(),
            pool_index: Some(i),
        })
    }

    fn pool(&self) -> Option<&CandidatePool> {
        Some(&self.pool)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    MockPool,
    ExternalHttp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProposalConfig {
    pub kind: ProposalKind,
    /// Seed of the mock pool sampler.
    pub seed: u64,
    /// ℓ: maximum whitespace tokens per unit.
    pub max_unit_tokens: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub system_prompt: String,
    pub max_tokens: u32,
    pub timeout_secs: u64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            kind: ProposalKind::MockPool,
            seed: 0,
            max_unit_tokens: 32,
            endpoint: None,
            model: None,
            token: None,
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            max_tokens: 128,
            timeout_secs: 60,
        }
    }
}

impl ProposalConfig {
    /// Fills unset fields from `CAROL_LLM_ENDPOINT`, `CAROL_LLM_MODEL`, `CAROL_LLM_TOKEN`.
    pub fn apply_env(&mut self) {
        if self.endpoint.is_none() {
            self.endpoint = env::var("CAROL_LLM_ENDPOINT").ok();
        }
        if self.model.is_none() {
            self.model = env::var("CAROL_LLM_MODEL").ok();
        }
        if self.token.is_none() {
            self.token = env::var("CAROL_LLM_TOKEN").ok();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| CarolError::Config {
            key: format!("proposal.{key}"),
            message: message.to_string(),
        };
        if self.max_unit_tokens == 0 {
            return Err(bad("max_unit_tokens", "must be at least 1"));
        }
        if self.kind == ProposalKind::ExternalHttp {
            if self.endpoint.as_deref().map_or(true, str::is_empty) {
                return Err(bad("endpoint", "required for external-http (or set CAROL_LLM_ENDPOINT)"));
            }
            if self.model.as_deref().map_or(true, str::is_empty) {
                return Err(bad("model", "required for external-http (or set CAROL_LLM_MODEL)"));
            }
        }
        Ok(())
    }
}

/// Keeps at most `max_tokens` whitespace-separated words.
pub fn truncate_words(text: &str, max_tokens: usize) -> String {
    text.split_whitespace()
        .take(max_tokens)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Remote chat model used as the proposal.
pub struct ChatProposal {
    cfg: ProposalConfig,
    embedder: Embedder,
}

impl ChatProposal {
    pub fn new(cfg: ProposalConfig, embedder: Embedder) -> Result<Self> {
        cfg.validate()?;
        Ok(ChatProposal { cfg, embedder })
    }

    /// System message carries the base prompt plus revision directives; the
    /// user message carries the query and the accepted statements.
    pub fn messages(&self, state: &ChainState) -> Value {
        let mut system = self.cfg.system_prompt.clone();
        for directive in &state.revisions {
            system.push('\n');
            system.push_str(directive);
        }
        let mut user = format!("Question: {}", state.query);
        if !state.accepted.is_empty() {
            user.push_str("\nStatements so far:");
            for unit in &state.accepted {
                user.push_str("\n- ");
                user.push_str(&unit.text);
            }
        }
        user.push_str(&format!(
            "\nGive the next statement in at most {} words.",
            self.cfg.max_unit_tokens
        ));
        json!([
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ])
    }

    pub fn request_body(&self, state: &ChainState) -> Value {
        json!({
            "model": self.cfg.model.as_deref().unwrap_or_default(),
            "messages": self.messages(state),
            "max_tokens": self.cfg.max_tokens,
        })
    }
}

pub(crate) fn parse_chat_reply(reply: &Value) -> Result<String> {
    reply
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CarolError::Provider {
            status: None,
            message: "malformed chat response: missing choices[0].message.content".into(),
        })
}

impl Proposal for ChatProposal {
    fn propose(&mut self, state: &ChainState) -> Result<Proposed> {
        let reply = http::post_json(
            self.cfg.endpoint.as_deref().unwrap_or_default(),
            self.cfg.token.as_deref(),
            &self.request_body(state),
            Duration::from_secs(self.cfg.timeout_secs),
        )?;
        let content = parse_chat_reply(&reply)?;
        let text = truncate_words(&content, self.cfg.max_unit_tokens);
        if text.is_empty() {
            return Err(CarolError::Degenerate("model returned an empty reply".into()));
        }
        let unit = SemanticUnit::embed(&text, &self.embedder, Origin::Proposed)?;
        Ok(Proposed {
            unit,
            pool_index: None,
        })
    }
}
