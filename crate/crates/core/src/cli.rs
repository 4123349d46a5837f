//! Command-line front end shared by the `carol` binary and the tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{analyze_pool, MixingReport};
use crate::chain::{run_chain, write_trace, ChainFailure};
use crate::cluster::{greedy_medoid_indices, Clustering};
use crate::config::RunConfig;
use crate::context::{build_context, load_context, save_context, Context};
use crate::detect::{detect, load_corpus, synthetic_corpus, MethodReport};
use crate::embed::Embedder;
use crate::error::{CarolError, Result};
use crate::fixtures;
use crate::objective::hallucination_score;
use crate::proposal::{CandidatePool, ChatProposal, MockProposal, Proposal, ProposalKind};

#[derive(Debug, Parser)]
#[command(name = "carol", version, about = "Ground generated statements in a trusted context")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Context file (.jsonl as written by `context build`, or .txt with one statement per line).
    #[arg(long, global = true)]
    pub context: Option<PathBuf>,
    /// Candidate pool (.jsonl with `text` and optional `weight`).
    #[arg(long, global = true)]
    pub pool: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or inspect an embedded context.
    #[command(subcommand)]
    Context(ContextCommand),
    /// Cluster the context around pool units.
    Cluster(ClusterArgs),
    /// Score a labeled corpus with the semantic and token-entropy detectors.
    Detect(DetectArgs),
    /// Run the accept-reject chain for a query.
    Mitigate(MitigateArgs),
    /// Curvature, mixing bound and empirical mixing for a pool.
    Analyze,
}

#[derive(Debug, Subcommand)]
pub enum ContextCommand {
    /// Embed statements (one per line) into a context file.
    Build {
        /// Statements file; defaults to the built-in Paris/France set.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the axioms of a context.
    Show,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Pick this many medoids from the pool greedily instead of using all of it.
    #[arg(long)]
    pub greedy: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Labeled corpus (.jsonl); without it a synthetic corpus is generated.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MitigateArgs {
    #[arg(long)]
    pub query: Option<String>,
}

struct Session {
    cfg: RunConfig,
    embedder: Embedder,
    out_dir: PathBuf,
    context: Option<PathBuf>,
    pool: Option<PathBuf>,
}

impl Session {
    fn new(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_env();
        if let Some(seed) = cli.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        let embedder = Embedder::new(&cfg.embedder)?;
        let out_dir = cli
            .out_dir
            .clone()
            .or_else(|| cfg.paths.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("carol-out"));
        Ok(Session {
            context: cli.context.clone().or_else(|| cfg.paths.context.clone()),
            pool: cli.pool.clone().or_else(|| cfg.paths.pool.clone()),
            cfg,
            embedder,
            out_dir,
        })
    }

    fn context(&self) -> Result<Context> {
        match &self.context {
            None => build_context(fixtures::TRUSTED_CONTEXT, &self.embedder),
            Some(p) if p.extension().is_some_and(|e| e == "txt") => {
                build_context(&read_statements(p)?, &self.embedder)
            }
            Some(p) => Ok(load_context(p, Some(&self.embedder.fingerprint()))?.context),
        }
    }

    fn pool(&self) -> Result<CandidatePool> {
        match &self.pool {
            Some(p) => CandidatePool::load(p, &self.embedder),
            None => {
                let texts = [fixtures::DENSE_AGREEMENT, fixtures::SPARSE_DISAGREEMENT].concat();
                CandidatePool::from_texts(&texts, vec![1.0; texts.len()], &self.embedder)
            }
        }
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir).map_err(|e| CarolError::io(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_path(name)?;
        fs::write(&path, contents).map_err(|e| CarolError::io(&path, e))?;
        Ok(path)
    }
}

fn read_statements(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CarolError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let session = Session::new(cli)?;
    match &cli.command {
        Command::Context(ContextCommand::Build { input }) => context_build(&session, input.as_deref()),
        Command::Context(ContextCommand::Show) => context_show(&session),
        Command::Cluster(args) => cluster(&session, args),
        Command::Detect(args) => cmd_detect(&session, args),
        Command::Mitigate(args) => cmd_mitigate(&session, args),
        Command::Analyze => cmd_analyze(&session).map(|_| ()),
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn context_build(s: &Session, input: Option<&Path>) -> Result<()> {
    let ctx = match input {
        Some(p) => build_context(&read_statements(p)?, &s.embedder)?,
        None => build_context(fixtures::TRUSTED_CONTEXT, &s.embedder)?,
    };
    let path = match &s.context {
        Some(p) if p.extension().is_none_or(|e| e != "txt") => p.clone(),
        _ => s.out_path("context.jsonl")?,
    };
    save_context(&ctx, &path)?;
    println!("wrote {} axioms to {}", ctx.len(), path.display());
    Ok(())
}

fn context_show(s: &Session) -> Result<()> {
    let ctx = s.context()?;
    println!("embedder: {}", ctx.embedder_fingerprint());
    for ax in ctx.axioms() {
        println!("{}\t{}", ax.id, ax.text);
    }
    Ok(())
}

fn cluster(s: &Session, args: &ClusterArgs) -> Result<()> {
    let ctx = s.context()?;
    let pool = s.pool()?;
    let medoids = match args.greedy {
        Some(k) => greedy_medoid_indices(&ctx, pool.candidates(), k)?
            .into_iter()
            .map(|i| pool.candidates()[i].clone())
            .collect(),
        None => pool.candidates().to_vec(),
    };
    let clustering = Clustering::build(&ctx, &medoids, s.cfg.chain.beta)?;
    let path = s.write("clustering.json", &pretty(&clustering.to_json()))?;
    for (m, members) in clustering.members().iter().enumerate() {
        println!("[{m}] {} ({} axioms)", clustering.medoids[m].text, members.len());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn roc_csv(report: &MethodReport) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &report.roc.points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}

fn cmd_detect(s: &Session, args: &DetectArgs) -> Result<()> {
    let ctx = s.context()?;
    let corpus_path = args.corpus.clone().or_else(|| s.cfg.paths.corpus.clone());
    let corpus = match &corpus_path {
        Some(p) => load_corpus(p)?,
        None => synthetic_corpus(&s.cfg.synthetic)?,
    };
    let reports = detect(&corpus, &ctx, &s.embedder, s.cfg.chain.beta)?;
    for r in &reports {
        s.write(&format!("roc_{}.csv", r.method), &roc_csv(r))?;
        println!(
            "{:<16} auc={:.4} accuracy={:.4} threshold={:.4}",
            r.method, r.auc, r.metrics.accuracy, r.threshold
        );
    }
    let report = json!({
        "corpus": corpus_path.map(|p| p.display().to_string()),
        "items": corpus.len(),
        "methods": reports,
        "config": s.cfg,
    });
    let path = s.write("detection_report.json", &pretty(&report))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_mitigate(s: &Session, args: &MitigateArgs) -> Result<()> {
    let ctx = s.context()?;
    let query = args.query.clone().unwrap_or_else(|| s.cfg.query.clone());
    let mut proposal: Box<dyn Proposal> = match s.cfg.proposal.kind {
        ProposalKind::MockPool => Box::new(MockProposal::new(s.pool()?, s.cfg.proposal.seed)),
        ProposalKind::ExternalHttp => Box::new(ChatProposal::new(s.cfg.proposal.clone(), s.embedder.clone())?),
    };
    let trace_path = s.out_path("trace.jsonl")?;
    let outcome = match run_chain(&query, &ctx, proposal.as_mut(), &s.cfg.chain) {
        Ok(o) => o,
        Err(ChainFailure { error, trace }) => {
            write_trace(&trace, &trace_path)?;
            eprintln!("partial trace ({} steps) in {}", trace.len(), trace_path.display());
            return Err(error);
        }
    };
    write_trace(&outcome.trace, &trace_path)?;
    let mut response = String::new();
    for unit in &outcome.response {
        response.push_str(&unit.text);
        response.push('\n');
    }
    s.write("response.txt", &response)?;
    let score = if outcome.response.is_empty() {
        None
    } else {
        Some(hallucination_score(&ctx, &outcome.response, s.cfg.chain.beta)?)
    };
    let report = json!({
        "query": query,
        "steps": outcome.trace.len(),
        "accepted": outcome.response.len(),
        "final_eval": outcome.final_eval,
        "hallucination_score": score,
        "step_budget": outcome.budget,
        "config": s.cfg,
    });
    s.write("report.json", &pretty(&report))?;
    print!("{response}");
    println!(
        "I = {:.6} after {} steps; outputs in {}",
        outcome.final_eval.mutual_info,
        outcome.trace.len(),
        s.out_dir.display()
    );
    Ok(())
}

fn tv_csv(report: &MixingReport) -> String {
    let mut out = String::from("step,tv_exact,tv_simulated\n");
    for &(step, tv) in &report.tv_curve {
        let sim = report
            .simulated_tv_curve
            .iter()
            .find(|(s, _)| *s == step)
            .map(|(_, v)| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{step},{tv},{sim}");
    }
    out
}

/// Writes `mixing_report.json` and `tv_curve.csv`; returns the report.
pub fn cmd_analyze_report(cfg: &RunConfig, ctx: &Context, pool: &CandidatePool) -> Result<MixingReport> {
    if cfg.proposal.kind == ProposalKind::ExternalHttp {
        return Err(CarolError::input(
            "mixing bounds need explicit proposal probabilities; unavailable for external proposals",
        ));
    }
    analyze_pool(ctx, pool, cfg.analysis.beta.unwrap_or(cfg.chain.beta), &cfg.analysis)
}

fn cmd_analyze(s: &Session) -> Result<MixingReport> {
    let ctx = s.context()?;
    let pool = s.pool()?;
    let report = cmd_analyze_report(&s.cfg, &ctx, &pool)?;
    let beta = s.cfg.analysis.beta.unwrap_or(s.cfg.chain.beta);
    let json = json!({ "report": report, "beta": beta, "config": s.cfg });
    s.write("mixing_report.json", &pretty(&json))?;
    s.write("tv_curve.csv", &tv_csv(&report))?;
    println!("curvature      {:.6}", report.gamma_bar);
    println!("q_min / q_max  {:.6} / {:.6}", report.q_min, report.q_max);
    match report.tau_theorem {
        Some(tau) => println!("tau bound      {tau:.2}"),
        None => println!("tau bound      none (q_min - q_max * curvature <= 0)"),
    }
    match report.empirical_tmix {
        Some(t) => println!("empirical tmix {t}"),
        None => println!("empirical tmix not reached in {} steps", s.cfg.analysis.max_steps),
    }
    println!("outputs in {}", s.out_dir.display());
    Ok(report)
}
