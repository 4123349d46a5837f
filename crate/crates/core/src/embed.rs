//! Statement embeddings.
//!
//! The built-in embedder is a hashed bag of character n-grams: the text is
//! lowercased and whitespace-collapsed, every character n-gram with length in
//! `ngram_min..=ngram_max` is hashed with 64-bit FNV-1a (offset basis
//! [`HASH_SEED`]) into one of `dimension` buckets, bucket counts form the
//! vector, and the result is optionally L2-normalized. It has no model
//! dependency and is bit-reproducible across machines.
//!
//! The external embedder POSTs `{"model": ..., "input": [...]}` and reads
//! `{"data": [{"embedding": [...]}, ...]}`.

use std::env;
use std::fmt;
use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CarolError, Result};
use crate::http;

/// FNV-1a 64-bit offset basis, used as the fixed hashing seed.
pub const HASH_SEED: u64 = 0xcbf2_9ce4_8422_2325;

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_NGRAM_RANGE: (usize, usize) = (2, 4);
const MIN_BUILTIN_DIMENSION: usize = 8;

/// A dense, finite embedding of one statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CarolError::input("embedding must have dimension >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(CarolError::input(format!(
                "embedding entry {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Bitwise equality of all entries; used to detect duplicate units.
    pub fn bit_eq(&self, other: &EmbeddingVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= n);
        }
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    BuiltinHash,
    ExternalHttp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub dimension: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub normalize: bool,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    #[serde(skip_serializing)]
    pub token: Option<String>,
    pub timeout_secs: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            kind: EmbedderKind::BuiltinHash,
            dimension: DEFAULT_DIMENSION,
            ngram_min: DEFAULT_NGRAM_RANGE.0,
            ngram_max: DEFAULT_NGRAM_RANGE.1,
            normalize: true,
            endpoint: None,
            model: None,
            token: None,
            timeout_secs: 60,
        }
    }
}

impl EmbedderConfig {
    pub fn builtin(dimension: usize, ngram_min: usize, ngram_max: usize, normalize: bool) -> Self {
        EmbedderConfig {
            dimension,
            ngram_min,
            ngram_max,
            normalize,
            ..Default::default()
        }
    }

    /// External provider settings read from `CAROL_EMBED_ENDPOINT`,
    /// `CAROL_EMBED_MODEL` and `CAROL_EMBED_TOKEN`. Raw vectors are kept.
    pub fn external_from_env() -> Result<Self> {
        let mut cfg = EmbedderConfig {
            kind: EmbedderKind::ExternalHttp,
            normalize: false,
            ..Default::default()
        };
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills unset endpoint/model/token fields from the environment.
    pub fn apply_env(&mut self) {
        if self.endpoint.is_none() {
            self.endpoint = env::var("CAROL_EMBED_ENDPOINT").ok();
        }
        if self.model.is_none() {
            self.model = env::var("CAROL_EMBED_MODEL").ok();
        }
        if self.token.is_none() {
            self.token = env::var("CAROL_EMBED_TOKEN").ok();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| CarolError::Config {
            key: format!("embedder.{key}"),
            message,
        };
        match self.kind {
            EmbedderKind::BuiltinHash => {
                if self.dimension < MIN_BUILTIN_DIMENSION {
                    return Err(bad(
                        "dimension",
                        format!("must be >= {MIN_BUILTIN_DIMENSION}, got {}", self.dimension),
                    ));
                }
                if self.ngram_min == 0 {
                    return Err(bad("ngram_min", "must be positive".into()));
                }
                if self.ngram_min > self.ngram_max {
                    return Err(bad(
                        "ngram_max",
                        format!("{} < ngram_min {}", self.ngram_max, self.ngram_min),
                    ));
                }
            }
            EmbedderKind::ExternalHttp => {
                if self.endpoint.as_deref().map_or(true, str::is_empty) {
                    return Err(bad(
                        "endpoint",
                        "required for external-http (or set CAROL_EMBED_ENDPOINT)".into(),
                    ));
                }
                if self.model.as_deref().map_or(true, str::is_empty) {
                    return Err(bad(
                        "model",
                        "required for external-http (or set CAROL_EMBED_MODEL)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Stable description of everything that affects the produced vectors.
    pub fn fingerprint(&self) -> String {
        match self.kind {
            EmbedderKind::BuiltinHash => format!(
                "builtin-hash;fnv1a64;seed={HASH_SEED:#018x};dim={};ngrams={}..={};normalize={}",
                self.dimension, self.ngram_min, self.ngram_max, self.normalize
            ),
            EmbedderKind::ExternalHttp => format!(
                "external-http;model={};endpoint={};normalize={}",
                self.model.as_deref().unwrap_or(""),
                self.endpoint.as_deref().unwrap_or(""),
                self.normalize
            ),
        }
    }
}

/// An embedder built from a validated [`EmbedderConfig`]. Immutable and `Sync`.
#[derive(Clone)]
pub struct Embedder {
    cfg: EmbedderConfig,
}

impl fmt::Debug for Embedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Embedder")
            .field("fingerprint", &self.cfg.fingerprint())
            .finish()
    }
}

impl Embedder {
    pub fn new(cfg: &EmbedderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Embedder { cfg: cfg.clone() })
    }

    pub fn builtin() -> Self {
        Embedder {
            cfg: EmbedderConfig::default(),
        }
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.cfg
    }

    pub fn fingerprint(&self) -> String {
        self.cfg.fingerprint()
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        check_text(text)?;
        match self.cfg.kind {
            EmbedderKind::BuiltinHash => Ok(self.hash_embed(text)),
            EmbedderKind::ExternalHttp => {
                let mut out = self.remote_embed(&[text])?;
                Ok(out.remove(0))
            }
        }
    }

    pub fn embed_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<EmbeddingVector>> {
        for (i, t) in texts.iter().enumerate() {
            check_text(t.as_ref()).map_err(|e| CarolError::input(format!("text #{i}: {e}")))?;
        }
        match self.cfg.kind {
            EmbedderKind::BuiltinHash => Ok(texts.iter().map(|t| self.hash_embed(t.as_ref())).collect()),
            EmbedderKind::ExternalHttp if texts.is_empty() => Ok(Vec::new()),
            EmbedderKind::ExternalHttp => {
                let refs: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
                self.remote_embed(&refs)
            }
        }
    }

    fn hash_embed(&self, text: &str) -> EmbeddingVector {
        let d = self.cfg.dimension;
        let mut counts = vec![0.0f64; d];
        let canon = canonical_text(text);
        let chars: Vec<char> = canon.chars().collect();
        let mut buf = String::new();
        for n in self.cfg.ngram_min..=self.cfg.ngram_max {
            if n > chars.len() {
                break;
            }
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window);
                let mut h = FnvHasher::with_key(HASH_SEED);
                h.write(buf.as_bytes());
                counts[(h.finish() % d as u64) as usize] += 1.0;
            }
        }
        let v = EmbeddingVector(counts);
        if self.cfg.normalize {
            v.normalized()
        } else {
            v
        }
    }

    fn remote_embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let endpoint = self.cfg.endpoint.as_deref().unwrap_or_default();
        let body = json!({
            "model": self.cfg.model.as_deref().unwrap_or_default(),
            "input": texts,
        });
        let reply = http::post_json(
            endpoint,
            self.cfg.token.as_deref(),
            &body,
            Duration::from_secs(self.cfg.timeout_secs),
        )?;
        let vectors = parse_embeddings_response(&reply)?;
        if vectors.len() != texts.len() {
            return Err(CarolError::Provider {
                status: None,
                message: format!(
                    "expected {} embeddings, provider returned {}",
                    texts.len(),
                    vectors.len()
                ),
            });
        }
        let dim = vectors[0].dim();
        if vectors.iter().any(|v| v.dim() != dim) {
            return Err(CarolError::Provider {
                status: None,
                message: "provider returned embeddings of differing dimension".into(),
            });
        }
        Ok(vectors
            .into_iter()
            .map(|v| if self.cfg.normalize { v.normalized() } else { v })
            .collect())
    }
}

fn check_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(CarolError::input("statement is empty"))
    } else {
        Ok(())
    }
}

fn canonical_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_embeddings_response(reply: &Value) -> Result<Vec<EmbeddingVector>> {
    let malformed = |what: &str| CarolError::Provider {
        status: None,
        message: format!("malformed embeddings response: {what}"),
    };
    let data = reply
        .get("data")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing `data` array"))?;
    data.iter()
        .enumerate()
        .map(|(i, item)| {
            let values = item
                .get("embedding")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed(&format!("data[{i}] has no `embedding` array")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| malformed(&format!("data[{i}] has a non-numeric entry"))))
                .collect::<Result<Vec<f64>>>()?;
            EmbeddingVector::new(values).map_err(|e| malformed(&format!("data[{i}]: {e}")))
        })
        .collect()
}

/// Embeds one statement with a fresh embedder for `cfg`.
pub fn embed_text(text: &str, cfg: &EmbedderConfig) -> Result<EmbeddingVector> {
    Embedder::new(cfg)?.embed(text)
}

pub fn embed_batch<S: AsRef<str>>(texts: &[S], cfg: &EmbedderConfig) -> Result<Vec<EmbeddingVector>> {
    Embedder::new(cfg)?.embed_batch(texts)
}
