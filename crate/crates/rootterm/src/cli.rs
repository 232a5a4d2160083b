//! Subcommands of the `rootterm` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rootterm_core::arena::{balanced_openings, Opening};
use rootterm_core::dataset::{
    self, accuracy_report, generate_dataset, relabel_curriculum, Dataset, EarlyStop, GenerationParams, LabelSource,
    ScoringPolicy,
};
use rootterm_core::exprlang::{Expression, DEFAULT_MAX_LEN};
use rootterm_core::game::TreeShape;
use rootterm_core::sampling::SamplingMode;

use crate::cache::SharedScoreCache;
use crate::discover::{discover, DiscoveryConfig, StopCondition, TableSharing, TermScore};
use crate::engine::{parse_engine, parse_grid, DisplaySpec};
use crate::formats::{self, RUN_LOG_FORMAT, RUN_LOG_VERSION, GAMES_FORMAT, GAMES_VERSION};
use crate::manifest::{manifest_path, sibling, RunManifest};
use crate::matches::{play_grid, MatchConfig};

const ENGINE_HELP: &str = "Engine spec: KIND[:key=value,...]. Kinds and keys:
  puct:c=0.2
  puct+term:c_e=0.15,term=\"/ 1 log + sc nb\",weight=1
  shuss:c_s=0.2,k=5,term=\"+ pr * * 2 sc sc\"
Terms are prefix expressions; quote them. Omitted keys default to
c=c_e=c_s=0.2, weight=1, k=5, term=\"sc\".";

#[derive(Debug, Parser)]
#[command(name = "rootterm", version, about = "Discover and test MCTS root exploration terms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of cached positions from synthetic game trees.
    GenDataset(GenDatasetArgs),
    /// Replace every label with the Sequential Halving winner at a larger budget.
    Relabel(RelabelArgs),
    /// Search for exploration terms that maximize dataset accuracy.
    Discover(DiscoverArgs),
    /// Report the full-dataset accuracy of given terms.
    EvalTerm(EvalTermArgs),
    /// Play side-swapped games between two engines over a constant grid.
    #[command(after_help = ENGINE_HELP)]
    Match(MatchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Most visited move of a PUCT search with --label-budget evaluations.
    Puct,
    /// Sequential Halving with term sc over the cached traces.
    Sh,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[arg(long, default_value_t = 200)]
    pub states: usize,
    #[arg(long, default_value_t = 8)]
    pub branching: usize,
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    /// Evaluations stored per arm (at least 32).
    #[arg(long, default_value_t = dataset::DEFAULT_TRACE_LEN)]
    pub trace_len: usize,
    #[arg(long, default_value_t = 0.2)]
    pub c_inner: f64,
    #[arg(long, default_value_t = 1024)]
    pub label_budget: usize,
    #[arg(long, value_enum, default_value_t = LabelMode::Puct)]
    pub label_mode: LabelMode,
    #[arg(long, default_value_t = 2)]
    pub opening_plies: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RelabelArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Halving evaluations per state.
    #[arg(long, default_value_t = 128)]
    pub budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct PolicyArgs {
    /// Halving evaluations per state when scoring.
    #[arg(long, default_value_t = 32)]
    pub budget: usize,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
}

impl PolicyArgs {
    fn policy(&self) -> ScoringPolicy {
        ScoringPolicy {
            budget: self.budget,
            top_k: self.top_k,
            ..ScoringPolicy::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Timing {
    /// On for --budget-seconds, off for --budget-exprs.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uniform,
    Amaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SharingArg {
    Shared,
    Independent,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Uniform)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 5.0)]
    pub temperature: f64,
    /// Stop after this many scored expressions.
    #[arg(long, conflicts_with = "budget_seconds")]
    pub budget_exprs: Option<u64>,
    /// Stop after this many wall-clock seconds.
    #[arg(long)]
    pub budget_seconds: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SharingArg::Shared)]
    pub sharing: SharingArg,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, default_value_t = 80)]
    pub early_stop_threshold: u32,
    #[arg(long, default_value_t = 200)]
    pub early_stop_after: usize,
    #[arg(long)]
    pub no_early_stop: bool,
    /// Record elapsed seconds in the log (makes it run-dependent).
    #[arg(long, value_enum, default_value_t = Timing::Auto)]
    pub timing: Timing,
    /// Distinct terms written to the best-terms file.
    #[arg(long, default_value_t = 20)]
    pub keep: usize,
    /// Discovery log path; the best-terms file goes to <out>.best.tsv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalTermArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Prefix expression; repeat for several rows.
    #[arg(long = "term", required = true)]
    pub terms: Vec<String>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Also write the report as TSV with a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, default_value = "puct:c=0.2")]
    pub engine_a: String,
    #[arg(long, default_value = "puct:c=0.2")]
    pub engine_b: String,
    /// Evaluations per move.
    #[arg(long, default_value_t = 32)]
    pub evals: usize,
    /// Games per grid cell; must be even (each opening is played twice).
    #[arg(long, default_value_t = 400)]
    pub games: usize,
    /// Openings file (JSON lines of {seed, shape, path}); generated from --seed when absent.
    #[arg(long)]
    pub openings: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub branching: usize,
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub opening_plies: usize,
    /// Openings must have a heuristic value within this distance of 0.5.
    #[arg(long, default_value_t = 0.05)]
    pub balance: f64,
    /// Constants for engine A (rows): a,b,c or start..end:step.
    #[arg(long)]
    pub grid_a: Option<String>,
    /// Constants for engine B (columns).
    #[arg(long)]
    pub grid_b: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Winrate table (TSV); games go to <out>.games.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Relabel(a) => relabel(a),
        Command::Discover(a) => discover_cmd(a),
        Command::EvalTerm(a) => eval_term(a),
        Command::Match(a) => match_cmd(a),
    }
}

fn finish(mut manifest: RunManifest, primary: &Path, artifacts: &[&Path], start: Instant) -> Result<()> {
    manifest.artifacts = artifacts.iter().map(|p| p.display().to_string()).collect();
    manifest.duration_s = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path(primary))?;
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    formats::read_dataset(path).with_context(|| format!("cannot load dataset {}", path.display()))
}

fn gen_dataset(a: GenDatasetArgs) -> Result<()> {
    let start = Instant::now();
    let params = GenerationParams {
        seed: a.seed,
        states: a.states,
        shape: TreeShape::new(a.branching, a.depth),
        trace_len: a.trace_len,
        c_inner: a.c_inner,
        label_source: match a.label_mode {
            LabelMode::Puct => LabelSource::Puct,
            LabelMode::Sh => LabelSource::Halving,
        },
        label_budget: a.label_budget,
        opening_plies: a.opening_plies,
        ..GenerationParams::default()
    };
    if a.branching < 2 {
        bail!("--branching must be at least 2");
    }
    if a.depth < 1 {
        bail!("--depth must be at least 1");
    }
    if !(a.c_inner.is_finite() && a.c_inner >= 0.0) {
        bail!("--c-inner must be finite and non-negative");
    }
    if a.label_budget == 0 {
        bail!("--label-budget must be positive");
    }
    let ds = generate_dataset(&params)?;
    formats::write_dataset(&ds, &a.out)?;
    eprintln!(
        "wrote {} states to {} ({} positions skipped, skip rate {:.3})",
        ds.len(),
        a.out.display(),
        ds.skipped,
        ds.skip_rate()
    );
    let manifest = RunManifest::new("gen-dataset", json!({ "generation": params, "out": a.out }));
    finish(manifest, &a.out, &[&a.out], start)
}

fn relabel(a: RelabelArgs) -> Result<()> {
    let start = Instant::now();
    let mut ds = load(&a.dataset)?;
    relabel_curriculum(&mut ds, a.budget)?;
    formats::write_dataset(&ds, &a.out)?;
    let manifest = RunManifest::new(
        "relabel",
        json!({ "dataset": a.dataset, "budget": a.budget, "out": a.out }),
    );
    finish(manifest, &a.out, &[&a.out], start)
}

#[derive(Serialize)]
struct LogHeader<'a> {
    format: &'a str,
    version: u32,
    dataset: &'a Path,
    states: usize,
    mode: SamplingMode,
    temperature: f64,
    max_len: usize,
    workers: usize,
    sharing: TableSharing,
    stop: StopCondition,
    seed: u64,
    policy: ScoringPolicy,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LogRecord {
    Improvement {
        evaluated: u64,
        score: u32,
        accuracy: f64,
        expr: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        elapsed_s: Option<f64>,
    },
    Summary {
        best_expression: Option<String>,
        best_infix: Option<String>,
        best_score: u32,
        best_accuracy: f64,
        evaluated: u64,
        memo_hits: u64,
        scorer_failures: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        elapsed_s: Option<f64>,
    },
}

fn discover_cmd(a: DiscoverArgs) -> Result<()> {
    let start = Instant::now();
    let ds = load(&a.dataset)?;
    if ds.is_empty() {
        bail!("dataset {} has no states", a.dataset.display());
    }
    let stop = match (a.budget_exprs, a.budget_seconds) {
        (Some(n), None) => StopCondition::Expressions(n),
        (None, Some(s)) => StopCondition::Seconds(s),
        (None, None) => StopCondition::Expressions(1000),
        (Some(_), Some(_)) => bail!("give either --budget-exprs or --budget-seconds"),
    };
    let config = DiscoveryConfig {
        mode: match a.mode {
            ModeArg::Uniform => SamplingMode::Uniform,
            ModeArg::Amaf => SamplingMode::Amaf,
        },
        temperature: a.temperature,
        max_len: a.max_len,
        workers: a.workers,
        stop,
        seed: a.seed,
        sharing: match a.sharing {
            SharingArg::Shared => TableSharing::Shared,
            SharingArg::Independent => TableSharing::Independent,
        },
        keep_best: a.keep,
    };
    config.validate()?;
    let mut policy = a.policy.policy();
    // Early stopping only applies when states remain after the window.
    policy.early_stop = (!a.no_early_stop && a.early_stop_after < ds.len()).then_some(EarlyStop {
        threshold: a.early_stop_threshold,
        after: a.early_stop_after,
    });
    policy.validate(&ds)?;
    let timing = match a.timing {
        Timing::On => true,
        Timing::Off => false,
        Timing::Auto => matches!(stop, StopCondition::Seconds(_)),
    };

    let memo = SharedScoreCache::new();
    let log = discover(&config, |term: &Expression| {
        dataset::score_expression(term, &ds, &policy, &memo)
            .map(|o| TermScore {
                score: o.score.hits,
                early_stopped: o.score.early_stopped,
                memo_hit: o.cache_hit,
            })
            .map_err(|e| e.to_string())
    })?;

    let n = ds.len() as f64;
    let when = |s: f64| timing.then_some(s);
    let mut records: Vec<LogRecord> = log
        .timeline
        .iter()
        .map(|i| LogRecord::Improvement {
            evaluated: i.evaluated,
            score: i.score,
            accuracy: 100.0 * f64::from(i.score) / n,
            expr: i.expr.clone(),
            elapsed_s: when(i.elapsed_s),
        })
        .collect();
    records.push(LogRecord::Summary {
        best_expression: log.best_expression.as_ref().map(|e| e.to_string()),
        best_infix: log.best_expression.as_ref().and_then(|e| e.to_infix().ok()),
        best_score: log.best_score,
        best_accuracy: 100.0 * f64::from(log.best_score) / n,
        evaluated: log.evaluated_count,
        memo_hits: log.memo_hits,
        scorer_failures: log.scorer_failures,
        elapsed_s: when(log.elapsed.as_secs_f64()),
    });
    let header = LogHeader {
        format: RUN_LOG_FORMAT,
        version: RUN_LOG_VERSION,
        dataset: &a.dataset,
        states: ds.len(),
        mode: config.mode,
        temperature: config.temperature,
        max_len: config.max_len,
        workers: config.workers,
        sharing: config.sharing,
        stop: config.stop,
        seed: config.seed,
        policy,
    };
    formats::write_jsonl(&a.out, &header, &records)?;

    let best_path = sibling(&a.out, "best.tsv");
    let mut best = String::from("# rootterm-best-terms v1\nscore\taccuracy\tprefix\tinfix\n");
    for (score, key) in &log.best_terms {
        let infix = Expression::parse(key).ok().and_then(|e| e.to_infix().ok()).unwrap_or_default();
        best.push_str(&format!("{score}\t{:.2}\t{key}\t{infix}\n", 100.0 * f64::from(*score) / n));
    }
    formats::write_text(&best_path, &best)?;

    if let Some(e) = &log.best_expression {
        eprintln!(
            "best {} = {} ({}/{} states) after {} expressions",
            e,
            e.to_infix().unwrap_or_default(),
            log.best_score,
            ds.len(),
            log.evaluated_count
        );
    }
    let manifest = RunManifest::new(
        "discover",
        json!({
            "dataset": a.dataset,
            "mode": config.mode,
            "temperature": config.temperature,
            "max_len": config.max_len,
            "workers": config.workers,
            "sharing": config.sharing,
            "stop": config.stop,
            "seed": config.seed,
            "keep": config.keep_best,
            "policy": policy,
            "timing": timing,
            "out": a.out,
        }),
    );
    finish(manifest, &a.out, &[&a.out, &best_path], start)
}

fn eval_term(a: EvalTermArgs) -> Result<()> {
    let start = Instant::now();
    let terms = a
        .terms
        .iter()
        .map(|t| {
            let e = Expression::parse(t).with_context(|| format!("cannot parse term {t:?}"))?;
            if !e.is_complete() {
                bail!("term {t:?} is incomplete ({} open leaves)", e.open_leaves());
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = load(&a.dataset)?;
    let policy = a.policy.policy();
    let rows = accuracy_report(&terms, &ds, &policy)?;
    let mut report = String::from("# rootterm-accuracy v1\nterm\tinfix\thits\tstates\taccuracy\n");
    for r in &rows {
        report.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.2}\n",
            r.term,
            r.term.to_infix().unwrap_or_default(),
            r.hits,
            r.states,
            r.percent()
        ));
    }
    print!("{report}");
    if let Some(out) = &a.out {
        formats::write_text(out, &report)?;
        let manifest = RunManifest::new(
            "eval-term",
            json!({ "dataset": a.dataset, "terms": a.terms, "budget": a.policy.budget, "top_k": a.policy.top_k, "out": out }),
        );
        finish(manifest, out, &[out], start)?;
    }
    Ok(())
}

fn read_openings(path: &Path) -> Result<Vec<Opening>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let o: Opening = serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            o.state().with_context(|| format!("{}:{}: invalid opening", path.display(), i + 1))?;
            Ok(o)
        })
        .collect()
}

#[derive(Serialize)]
struct GamesHeader<'a> {
    format: &'a str,
    version: u32,
    engine_a: String,
    engine_b: String,
    evals: usize,
}

#[derive(Serialize)]
struct CellRecord<'a> {
    a_constant: f64,
    b_constant: f64,
    games: usize,
    a_wins: usize,
    winrate: f64,
    ci_low: f64,
    ci_high: f64,
    records: &'a [rootterm_core::arena::GameRecord],
}

fn match_cmd(a: MatchArgs) -> Result<()> {
    let start = Instant::now();
    let engine_a = parse_engine(&a.engine_a).context("bad --engine-a")?;
    let engine_b = parse_engine(&a.engine_b).context("bad --engine-b")?;
    if a.evals == 0 {
        bail!("--evals must be at least 1");
    }
    if a.games == 0 || !a.games.is_multiple_of(2) {
        bail!("--games must be a positive even number (each opening is played with both sides first)");
    }
    let openings = match &a.openings {
        Some(path) => {
            let mut all = read_openings(path)?;
            if all.len() < a.games / 2 {
                bail!("{} holds {} openings, {} games need {}", path.display(), all.len(), a.games, a.games / 2);
            }
            all.truncate(a.games / 2);
            all
        }
        None => {
            if a.branching < 2 || a.opening_plies >= a.depth {
                bail!("need --branching ≥ 2 and --opening-plies < --depth");
            }
            if a.balance.is_nan() || a.balance <= 0.0 {
                bail!("--balance must be positive");
            }
            balanced_openings(a.games / 2, a.seed, TreeShape::new(a.branching, a.depth), a.opening_plies, a.balance)?
        }
    };
    let grid = |g: &Option<String>, default: f64| match g {
        Some(text) => parse_grid(text).map_err(anyhow::Error::msg),
        None => Ok(vec![default]),
    };
    let a_grid = grid(&a.grid_a, engine_a.constant())?;
    let b_grid = grid(&a.grid_b, engine_b.constant())?;
    let config = MatchConfig {
        a: engine_a,
        b: engine_b,
        evals: a.evals,
        openings,
    };
    let cells = play_grid(&config, &a_grid, &b_grid)?;

    let winrates: Vec<Vec<f64>> = cells.chunks(b_grid.len()).map(|row| row.iter().map(|c| c.result.winrate).collect()).collect();
    let label = |e: &rootterm_core::arena::EngineSpec| match e {
        rootterm_core::arena::EngineSpec::Puct { .. } => "c",
        rootterm_core::arena::EngineSpec::PuctTerm { .. } => "c_e",
        rootterm_core::arena::EngineSpec::Shuss { .. } => "c_s",
    };
    let table = formats::winrate_table(label(&config.a), label(&config.b), &a_grid, &b_grid, &winrates);
    formats::write_text(&a.out, &table)?;
    print!("{table}");
    for c in &cells {
        eprintln!(
            "A={} B={}: {}/{} wins, winrate {:.2}% [{:.2}, {:.2}]",
            c.a_constant,
            c.b_constant,
            c.result.a_wins,
            c.result.games,
            100.0 * c.result.winrate,
            100.0 * c.result.ci_low,
            100.0 * c.result.ci_high
        );
    }

    let games_path = sibling(&a.out, "games.jsonl");
    let header = GamesHeader {
        format: GAMES_FORMAT,
        version: GAMES_VERSION,
        engine_a: DisplaySpec(&config.a).to_string(),
        engine_b: DisplaySpec(&config.b).to_string(),
        evals: config.evals,
    };
    let records: Vec<CellRecord> = cells
        .iter()
        .map(|c| CellRecord {
            a_constant: c.a_constant,
            b_constant: c.b_constant,
            games: c.result.games,
            a_wins: c.result.a_wins,
            winrate: c.result.winrate,
            ci_low: c.result.ci_low,
            ci_high: c.result.ci_high,
            records: &c.result.records,
        })
        .collect();
    formats::write_jsonl(&games_path, &header, &records)?;
    let manifest = RunManifest::new(
        "match",
        json!({
            "engine_a": header.engine_a,
            "engine_b": header.engine_b,
            "evals": a.evals,
            "games": a.games,
            "openings": a.openings,
            "branching": a.branching,
            "depth": a.depth,
            "opening_plies": a.opening_plies,
            "balance": a.balance,
            "grid_a": a_grid,
            "grid_b": b_grid,
            "seed": a.seed,
            "out": a.out,
        }),
    );
    finish(manifest, &a.out, &[&a.out, &games_path], start)
}
