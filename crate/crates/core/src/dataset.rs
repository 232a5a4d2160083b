//! Cached-evaluation datasets and fast scoring of exploration terms.
//!
//! Each record is a position with, for every qualifying root move, the
//! sequence of evaluations returned by successive one-evaluation searches
//! after that move. Replaying Sequential Halving over those traces scores
//! a term without running any search.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;

use alloc::collections::BTreeMap;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bandits::{self, Arm, BanditError, CachedArm, RootArm, DEFAULT_LAMBDA, DEFAULT_MIN_PRIOR};
use crate::exprlang::Expression;
use crate::game::{GameError, PGameState, TreeShape};
use crate::search::{self, SearchError, SubtreeArm};

pub const DEFAULT_TRACE_LEN: usize = 38;
pub const MIN_TRACE_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("trace length {0} is below the minimum of 32")]
    TraceTooShort(usize),
    #[error("state count must be positive")]
    NoStates,
    #[error("opening of {plies} plies leaves no move in a depth-{depth} tree")]
    OpeningTooLong { plies: usize, depth: usize },
    #[error("state {state}: schedule infeasible: {source}")]
    Infeasible { state: String, source: BanditError },
    #[error("invalid scoring policy: {0}")]
    Policy(&'static str),
    #[error("gave up after {0} consecutive skipped positions")]
    TooManySkips(usize),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Where a cached position sits in its synthetic tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeRef {
    pub seed: u64,
    pub shape: TreeShape,
    pub path: Vec<usize>,
}

/// One position with its per-move evaluation traces and label move.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedState {
    pub state_id: String,
    pub tree: TreeRef,
    /// Descending prior order.
    pub arms: Vec<CachedArm>,
    pub label: usize,
}

impl CachedState {
    pub fn priors(&self) -> Vec<f64> {
        self.arms.iter().map(|a| a.prior).collect()
    }

    pub fn trace_len(&self) -> usize {
        self.arms.iter().map(|a| a.trace_len()).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LabelSource {
    /// Most visited move of a long PUCT search.
    Puct,
    /// Winner of Sequential Halving with the `sc` term over the cached traces.
    Halving,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationParams {
    pub seed: u64,
    pub states: usize,
    pub shape: TreeShape,
    pub trace_len: usize,
    /// PUCT constant of the per-move trace searches and the label search.
    pub c_inner: f64,
    pub label_source: LabelSource,
    /// Evaluations of the label search (PUCT) or halving replay.
    pub label_budget: usize,
    pub opening_plies: usize,
    pub min_prior: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            seed: 0,
            states: 200,
            shape: TreeShape::new(8, 8),
            trace_len: DEFAULT_TRACE_LEN,
            c_inner: 0.2,
            label_source: LabelSource::Puct,
            label_budget: 1024,
            opening_plies: 2,
            min_prior: DEFAULT_MIN_PRIOR,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.states == 0 {
            return Err(DatasetError::NoStates);
        }
        // replay feasibility first: it is the more specific complaint
        if self.label_source == LabelSource::Halving {
            check_replay(self.label_budget, self.shape.branching, self.trace_len, "<all>")?;
        }
        if self.trace_len < MIN_TRACE_LEN {
            return Err(DatasetError::TraceTooShort(self.trace_len));
        }
        if self.opening_plies >= self.shape.depth {
            return Err(DatasetError::OpeningTooLong {
                plies: self.opening_plies,
                depth: self.shape.depth,
            });
        }
        Ok(())
    }
}

fn check_replay(budget: usize, arms: usize, trace_len: usize, state: &str) -> Result<(), DatasetError> {
    if arms < 2 {
        return Ok(());
    }
    let infeasible = |source| DatasetError::Infeasible {
        state: state.into(),
        source,
    };
    let schedule = bandits::sh_schedule(budget, arms, DEFAULT_LAMBDA).map_err(infeasible)?;
    let wanted = schedule.per_arm_need();
    if wanted > trace_len {
        return Err(infeasible(BanditError::TraceExhausted {
            arm: 0,
            wanted,
            available: trace_len,
        }));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: GenerationParams,
    pub states: Vec<CachedState>,
    /// Positions drawn but rejected during generation.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn skip_rate(&self) -> f64 {
        let drawn = self.skipped + self.states.len();
        if drawn == 0 {
            0.0
        } else {
            self.skipped as f64 / drawn as f64
        }
    }
}

const MAX_CONSECUTIVE_SKIPS: usize = 10_000;

/// Generates a dataset of cached positions from synthetic trees.
pub fn generate_dataset(params: &GenerationParams) -> Result<Dataset, DatasetError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut states = Vec::with_capacity(params.states);
    let mut skipped = 0;
    let mut streak = 0;
    while states.len() < params.states {
        let tree_seed = rng.next_u64();
        let mut pos = PGameState::root(tree_seed, params.shape)?;
        for _ in 0..params.opening_plies {
            let priors = pos.heuristic_eval().priors;
            let mv = WeightedIndex::new(&priors)
                .map(|d| d.sample(&mut rng))
                .unwrap_or(0);
            pos.play(mv)?;
        }
        let state_id = format!("s{:05}", states.len());
        match cache_position(&pos, params, state_id)? {
            Some(state) => {
                states.push(state);
                streak = 0;
            }
            None => {
                skipped += 1;
                streak += 1;
                if streak >= MAX_CONSECUTIVE_SKIPS {
                    return Err(DatasetError::TooManySkips(streak));
                }
            }
        }
    }
    let mut dataset = Dataset {
        params: params.clone(),
        states,
        skipped,
    };
    if params.label_source == LabelSource::Halving {
        relabel_curriculum(&mut dataset, params.label_budget)?;
    }
    Ok(dataset)
}

fn cache_position(
    pos: &PGameState,
    params: &GenerationParams,
    state_id: String,
) -> Result<Option<CachedState>, DatasetError> {
    let priors = pos.heuristic_eval().priors;
    let order = match bandits::filter_top_prior(&priors, priors.len(), params.min_prior) {
        Ok(order) if order.len() >= 2 => order,
        _ => return Ok(None),
    };
    let label = match params.label_source {
        LabelSource::Puct => {
            let out = search::puct_search(pos, params.label_budget, params.c_inner, None)?;
            if !order.contains(&out.chosen) {
                return Ok(None);
            }
            out.chosen
        }
        // filled in by the relabel pass
        LabelSource::Halving => order[0],
    };
    let mut arms = Vec::with_capacity(order.len());
    for &mv in &order {
        let mut arm = SubtreeArm::new(pos, mv, priors[mv], params.c_inner)?;
        arm.sample(params.trace_len).map_err(SearchError::from)?;
        arms.push(CachedArm::new(mv, priors[mv], arm.into_evals()));
    }
    Ok(Some(CachedState {
        state_id,
        tree: TreeRef {
            seed: pos.seed(),
            shape: pos.shape(),
            path: pos.path().to_vec(),
        },
        arms,
        label,
    }))
}

/// Replaces every label by the winner of `sc`-driven Sequential Halving
/// with `budget` evaluations over all stored arms.
pub fn relabel_curriculum(dataset: &mut Dataset, budget: usize) -> Result<(), DatasetError> {
    let term = Expression::parse("sc").expect("valid term");
    for state in &mut dataset.states {
        check_replay(budget, state.arms.len(), state.trace_len(), &state.state_id)?;
        let mut arms: Vec<RootArm> = state
            .arms
            .iter()
            .enumerate()
            .map(|(i, a)| RootArm::new(i, a))
            .collect();
        let winner = bandits::run_sequential_halving(&mut arms, budget, DEFAULT_LAMBDA, &term)
            .map_err(|source| DatasetError::Infeasible {
                state: state.state_id.clone(),
                source,
            })?;
        state.label = state.arms[winner].mv;
    }
    dataset.params.label_source = LabelSource::Halving;
    dataset.params.label_budget = budget;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EarlyStop {
    /// Minimum hits required once `after` states have been scored.
    pub threshold: u32,
    pub after: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            threshold: 80,
            after: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoringPolicy {
    /// Halving evaluations per state.
    pub budget: usize,
    pub top_k: usize,
    pub early_stop: Option<EarlyStop>,
    pub lambda: f64,
    pub min_prior: f64,
}

impl Default for ScoringPolicy {
    fn default() -> Self {
        ScoringPolicy {
            budget: 32,
            top_k: 5,
            early_stop: Some(EarlyStop::default()),
            lambda: DEFAULT_LAMBDA,
            min_prior: DEFAULT_MIN_PRIOR,
        }
    }
}

impl ScoringPolicy {
    pub fn without_early_stop(self) -> Self {
        ScoringPolicy {
            early_stop: None,
            ..self
        }
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<(), DatasetError> {
        if self.top_k == 0 {
            return Err(DatasetError::Policy("top_k must be at least 1"));
        }
        if self.budget == 0 {
            return Err(DatasetError::Policy("budget must be positive"));
        }
        if let Some(es) = self.early_stop {
            if es.after > dataset.len() {
                return Err(DatasetError::Policy("early stop window exceeds the dataset"));
            }
        }
        Ok(())
    }
}

/// Accuracy of one term, possibly cut short by early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Score {
    pub hits: u32,
    pub states_scored: u32,
    pub early_stopped: bool,
}

/// Memo table from canonical term keys to scores. Shared by `&self` so a
/// concurrent implementation can sit behind the same interface.
pub trait ScoreMemo {
    fn lookup(&self, key: &str) -> Option<Score>;
    fn store(&self, key: String, score: Score);
}

/// Memo that never remembers anything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoMemo;

impl ScoreMemo for NoMemo {
    fn lookup(&self, _: &str) -> Option<Score> {
        None
    }

    fn store(&self, _: String, _: Score) {}
}

/// Single-threaded memo.
#[derive(Debug, Default)]
pub struct ScoreCache {
    map: RefCell<BTreeMap<String, Score>>,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.borrow().is_empty()
    }
}

impl ScoreMemo for ScoreCache {
    fn lookup(&self, key: &str) -> Option<Score> {
        self.map.borrow().get(key).copied()
    }

    fn store(&self, key: String, score: Score) {
        self.map.borrow_mut().insert(key, score);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreOutcome {
    pub score: Score,
    pub cache_hit: bool,
}

/// Whether halving with `term` picks the label move of `state`.
pub fn hits_label(state: &CachedState, term: &Expression, policy: &ScoringPolicy) -> Result<bool, DatasetError> {
    let order = bandits::filter_top_prior(&state.priors(), policy.top_k, policy.min_prior)
        .map_err(|source| DatasetError::Infeasible {
            state: state.state_id.clone(),
            source,
        })?;
    let mut arms: Vec<RootArm> = order
        .iter()
        .map(|&i| RootArm::new(i, &state.arms[i]))
        .collect();
    let winner = bandits::run_sequential_halving(&mut arms, policy.budget, policy.lambda, term).map_err(
        |source| DatasetError::Infeasible {
            state: state.state_id.clone(),
            source,
        },
    )?;
    Ok(state.arms[arms[winner].index].mv == state.label)
}

/// Counts the states whose label move Sequential Halving with `term` finds.
pub fn score_expression<M: ScoreMemo + ?Sized>(
    term: &Expression,
    dataset: &Dataset,
    policy: &ScoringPolicy,
    memo: &M,
) -> Result<ScoreOutcome, DatasetError> {
    let key = term.canonical_key();
    if let Some(score) = memo.lookup(&key) {
        return Ok(ScoreOutcome {
            score,
            cache_hit: true,
        });
    }
    if !term.is_complete() {
        return Err(DatasetError::Search(SearchError::IncompleteTerm));
    }
    policy.validate(dataset)?;
    let mut hits = 0u32;
    let mut scored = 0u32;
    let mut early_stopped = false;
    for (i, state) in dataset.states.iter().enumerate() {
        if hits_label(state, term, policy)? {
            hits += 1;
        }
        scored += 1;
        if let Some(es) = policy.early_stop {
            if i + 1 == es.after && hits < es.threshold && i + 1 < dataset.len() {
                early_stopped = true;
                break;
            }
        }
    }
    let score = Score {
        hits,
        states_scored: scored,
        early_stopped,
    };
    memo.store(key, score);
    Ok(ScoreOutcome {
        score,
        cache_hit: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub term: Expression,
    pub hits: u32,
    pub states: usize,
}

impl AccuracyRow {
    pub fn percent(&self) -> f64 {
        if self.states == 0 {
            0.0
        } else {
            100.0 * self.hits as f64 / self.states as f64
        }
    }
}

/// Full-dataset accuracy of each term, in input order.
pub fn accuracy_report(
    terms: &[Expression],
    dataset: &Dataset,
    policy: &ScoringPolicy,
) -> Result<Vec<AccuracyRow>, DatasetError> {
    let policy = policy.without_early_stop();
    terms
        .iter()
        .map(|t| {
            let out = score_expression(t, dataset, &policy, &NoMemo)?;
            Ok(AccuracyRow {
                term: t.clone(),
                hits: out.score.hits,
                states: dataset.len(),
            })
        })
        .collect()
}
