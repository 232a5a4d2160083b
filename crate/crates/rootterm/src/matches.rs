//! Side-swapped matches between two engines, played in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rootterm_core::arena::{self, EngineSpec, GameRecord, Opening};
use rootterm_core::search::SearchError;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub a: EngineSpec,
    pub b: EngineSpec,
    /// Evaluations per move for both sides.
    pub evals: usize,
    /// Each opening is played twice, once with either side first.
    pub openings: Vec<Opening>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub games: usize,
    pub a_wins: usize,
    pub winrate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub records: Vec<GameRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("no openings to play")]
    NoOpenings,
    #[error("evaluations per move must be at least 1")]
    ZeroEvals,
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Plays every opening with sides swapped. Games run on the rayon pool but
/// records come back in opening order, so results do not depend on
/// scheduling.
pub fn play_match(config: &MatchConfig) -> Result<MatchResult, MatchError> {
    if config.openings.is_empty() {
        return Err(MatchError::NoOpenings);
    }
    if config.evals == 0 {
        return Err(MatchError::ZeroEvals);
    }
    let records = config
        .openings
        .par_iter()
        .flat_map_iter(|o| [(o, true), (o, false)])
        .map(|(o, a_first)| arena::play_game(o, &config.a, &config.b, a_first, config.evals))
        .collect::<Result<Vec<_>, _>>()?;
    let a_wins = records.iter().filter(|r| r.a_won).count();
    let games = records.len();
    let (ci_low, ci_high) = arena::wilson_interval(a_wins, games);
    Ok(MatchResult {
        games,
        a_wins,
        winrate: a_wins as f64 / games as f64,
        ci_low,
        ci_high,
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub a_constant: f64,
    pub b_constant: f64,
    pub result: MatchResult,
}

/// One match per (engine A constant, engine B constant) pair, row-major.
pub fn play_grid(
    config: &MatchConfig,
    a_grid: &[f64],
    b_grid: &[f64],
) -> Result<Vec<GridCell>, MatchError> {
    let mut cells = Vec::with_capacity(a_grid.len() * b_grid.len());
    for &ca in a_grid {
        for &cb in b_grid {
            let cfg = MatchConfig {
                a: config.a.with_constant(ca),
                b: config.b.with_constant(cb),
                ..config.clone()
            };
            cells.push(GridCell {
                a_constant: ca,
                b_constant: cb,
                result: play_match(&cfg)?,
            });
        }
    }
    Ok(cells)
}
