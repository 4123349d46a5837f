//! Hallucination detection harness: confusion metrics, ROC sweeps and a
//! synthetic labeled corpus.
//!
//! The positive class is "hallucinated". Both detectors produce scores where
//! larger means more suspicious: the semantic detector uses
//! [`hallucination_score`], the baseline uses mean token entropy.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cluster::{Origin, SemanticUnit};
use crate::context::Context;
use crate::embed::Embedder;
use crate::error::{CarolError, Result};
use crate::objective::{hallucination_score, token_entropy};
use crate::rng;
use crate::semantics::softmax;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Rates that would divide by zero are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
    pub auc: Option<f64>,
    pub counts: Counts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl DetectionMetrics {
    pub fn from_counts(counts: Counts) -> Result<Self> {
        let Counts { tp, tn, fp, fn_ } = counts;
        let total = tp + tn + fp + fn_;
        if total == 0 {
            return Err(CarolError::input("no predictions to score"));
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Ok(DetectionMetrics {
            accuracy: (tp + tn) as f64 / total as f64,
            precision,
            recall,
            specificity: ratio(tn, tn + fp),
            f1,
            fpr: ratio(fp, fp + tn),
            auc: None,
            counts,
        })
    }
}

/// `labels[i]` and `predictions[i]` are `true` for the positive class.
pub fn confusion_metrics(labels: &[bool], predictions: &[bool]) -> Result<DetectionMetrics> {
    if labels.len() != predictions.len() {
        return Err(CarolError::input(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut c = Counts::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    DetectionMetrics::from_counts(c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over thresholds `+∞`, every distinct score in descending order, and
/// `-∞`. An item is flagged when its score is at least the threshold. The
/// area is the trapezoidal sum, so tied scores count half.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(CarolError::input("scores and labels differ in length"));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(CarolError::input(format!("score {s} is not a number")));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(CarolError::input("ROC needs both classes"));
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    thresholds.insert(0, f64::INFINITY);
    thresholds.push(f64::NEG_INFINITY);

    let points: Vec<RocPoint> = thresholds
        .into_iter()
        .map(|t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&s, &y) in scores.iter().zip(labels) {
                if s >= t {
                    if y {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint {
                threshold: t,
                fpr: fp as f64 / neg as f64,
                tpr: tp as f64 / pos as f64,
            }
        })
        .collect();
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Hallucinated,
    Factual,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub id: String,
    pub units: Vec<String>,
    pub label: Option<Label>,
    /// One next-token distribution per generated position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_distributions: Option<Vec<Vec<f64>>>,
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusItem>> {
    let file = File::open(path).map_err(|e| CarolError::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CarolError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| CarolError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(items)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub auc: f64,
    /// Threshold with the highest accuracy (first one on ties).
    pub threshold: f64,
    pub metrics: DetectionMetrics,
    pub roc: Roc,
    pub scores: Vec<f64>,
}

fn method_report(method: &str, scores: Vec<f64>, labels: &[bool]) -> Result<MethodReport> {
    let roc = roc_curve(&scores, labels)?;
    let mut best: Option<(f64, DetectionMetrics)> = None;
    for p in &roc.points {
        let predictions: Vec<bool> = scores.iter().map(|&s| s >= p.threshold).collect();
        let m = confusion_metrics(labels, &predictions)?;
        if best.as_ref().map_or(true, |(_, b)| m.accuracy > b.accuracy) {
            best = Some((p.threshold, m));
        }
    }
    let (threshold, mut metrics) = best.expect("roc has at least two points");
    metrics.auc = Some(roc.auc);
    Ok(MethodReport {
        method: method.to_string(),
        auc: roc.auc,
        threshold,
        metrics,
        roc,
        scores,
    })
}

pub const SEMANTIC_METHOD: &str = "semantic-entropy";
pub const TOKEN_METHOD: &str = "token-entropy";

/// Scores every item with the semantic detector, and with the token-entropy
/// baseline when every item carries token distributions.
pub fn detect(
    corpus: &[CorpusItem],
    ctx: &Context,
    embedder: &Embedder,
    beta: f64,
) -> Result<Vec<MethodReport>> {
    if corpus.is_empty() {
        return Err(CarolError::input("corpus is empty"));
    }
    let mut labels = Vec::with_capacity(corpus.len());
    let mut semantic = Vec::with_capacity(corpus.len());
    for item in corpus {
        let label = item
            .label
            .ok_or_else(|| CarolError::input(format!("item {} has no label", item.id)))?;
        labels.push(label == Label::Hallucinated);
        let units = SemanticUnit::embed_all(&item.units, embedder, Origin::Proposed)
            .map_err(|e| CarolError::input(format!("item {}: {e}", item.id)))?;
        semantic.push(hallucination_score(ctx, &units, beta)?);
    }
    let mut reports = vec![method_report(SEMANTIC_METHOD, semantic, &labels)?];
    if corpus.iter().all(|i| i.token_distributions.is_some()) {
        let token = corpus
            .iter()
            .map(|i| token_entropy(i.token_distributions.as_deref().unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        reports.push(method_report(TOKEN_METHOD, token, &labels)?);
    }
    Ok(reports)
}

/// Statements consistent with the trusted Paris/France context.
pub const SUPPORTED_BANK: &[&str] = &[
    "Paris is the capital of France",
    "France's capital city is Paris",
    "The French government is seated in Paris",
    "Paris is the political center of France",
    "France is a country in Western Europe",
    "France belongs to the European Union",
    "Paris is known for the Eiffel Tower",
    "The Louvre Museum is located in Paris",
    "The Seine River flows through Paris",
    "The French government is based in Paris",
    "Paris contains the Eiffel Tower and the Louvre",
    "France is located in Europe",
];

/// Statements contradicting the trusted context.
pub const CONTRADICTING_BANK: &[&str] = &[
    "Berlin is the capital of France",
    "The Eiffel Tower is located in Rome",
    "France is a country in South America",
    "Madrid is the capital of France",
    "Lyon is the capital city of France",
    "The Louvre Museum is located in London",
    "The Thames flows through Paris",
    "France is an island in the Pacific Ocean",
    "The French government is seated in Marseille",
    "Paris is known for the Colosseum",
    "France left the European Union",
    "The Seine River flows through Berlin",
];

/// Parameters of the synthetic dense-versus-sparse corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusConfig {
    pub factual: usize,
    pub hallucinated: usize,
    pub units_per_item: usize,
    /// Probability of dropping one word from a unit.
    pub drop_word: f64,
    /// Probability of swapping two adjacent words in a unit.
    pub swap_words: f64,
    pub vocab: usize,
    /// Mean logit scale of token distributions; larger means more peaked.
    pub factual_confidence: f64,
    pub hallucinated_confidence: f64,
    pub confidence_spread: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            factual: 50,
            hallucinated: 50,
            units_per_item: 3,
            drop_word: 0.3,
            swap_words: 0.3,
            vocab: 16,
            factual_confidence: 3.0,
            hallucinated_confidence: 2.6,
            confidence_spread: 0.8,
            seed: 0,
        }
    }
}

fn perturb<R: Rng>(text: &str, cfg: &SyntheticCorpusConfig, rng: &mut R) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    if words.len() > 3 && rng.gen_bool(cfg.drop_word) {
        words.remove(rng.gen_range(0..words.len()));
    }
    if words.len() > 2 && rng.gen_bool(cfg.swap_words) {
        let i = rng.gen_range(0..words.len() - 1);
        words.swap(i, i + 1);
    }
    words.join(" ")
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn token_distributions<R: Rng>(words: usize, confidence: f64, vocab: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..words)
        .map(|_| {
            let logits: Vec<f64> = (0..vocab).map(|_| confidence * normal(rng)).collect();
            softmax(&logits).expect("finite logits")
        })
        .collect()
}

/// Factual items draw units from [`SUPPORTED_BANK`], hallucinated ones from
/// [`CONTRADICTING_BANK`]; each unit gets word-level noise and each word a
/// mock next-token distribution whose peakedness depends on the label.
pub fn synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<Vec<CorpusItem>> {
    let k = cfg.units_per_item;
    if k == 0 || k > SUPPORTED_BANK.len().min(CONTRADICTING_BANK.len()) {
        return Err(CarolError::input(format!("units_per_item {k} is out of range")));
    }
    for p in [cfg.drop_word, cfg.swap_words] {
        if !(0.0..=1.0).contains(&p) {
            return Err(CarolError::input(format!("probability {p} is outside [0, 1]")));
        }
    }
    if cfg.vocab < 2 {
        return Err(CarolError::input("vocab must be at least 2"));
    }
    let mut rng = rng::stream(cfg.seed, 0);
    let plan = std::iter::repeat((Label::Factual, SUPPORTED_BANK, cfg.factual_confidence))
        .take(cfg.factual)
        .chain(
            std::iter::repeat((Label::Hallucinated, CONTRADICTING_BANK, cfg.hallucinated_confidence))
                .take(cfg.hallucinated),
        );
    let mut items = Vec::with_capacity(cfg.factual + cfg.hallucinated);
    for (i, (label, bank, confidence)) in plan.enumerate() {
        let units: Vec<String> = bank
            .choose_multiple(&mut rng, k)
            .map(|s| perturb(s, cfg, &mut rng))
            .collect();
        let words = units.iter().map(|u| u.split_whitespace().count()).sum();
        let scale = (confidence + cfg.confidence_spread * normal(&mut rng)).max(0.0);
        items.push(CorpusItem {
            id: format!("item-{i:03}"),
            units,
            label: Some(label),
            token_distributions: Some(token_distributions(words, scale, cfg.vocab, &mut rng)),
        });
    }
    Ok(items)
}
