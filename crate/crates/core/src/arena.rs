//! Head-to-head games between search engines on synthetic trees.

use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exprlang::Expression;
use crate::game::{GameError, PGameState, TreeShape};
use crate::search::{self, RootTerm, SearchError, ShussConfig};

/// How an engine picks its move.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineSpec {
    Puct {
        c: f64,
    },
    /// PUCT whose root score also adds `weight · term`.
    PuctTerm {
        c_e: f64,
        term: Expression,
        weight: f64,
    },
    Shuss {
        c_s: f64,
        top_k: usize,
        term: Expression,
    },
}

impl EngineSpec {
    /// The constant a grid sweeps over.
    pub fn constant(&self) -> f64 {
        match self {
            EngineSpec::Puct { c } => *c,
            EngineSpec::PuctTerm { c_e, .. } => *c_e,
            EngineSpec::Shuss { c_s, .. } => *c_s,
        }
    }

    pub fn with_constant(&self, value: f64) -> EngineSpec {
        let mut out = self.clone();
        match &mut out {
            EngineSpec::Puct { c } => *c = value,
            EngineSpec::PuctTerm { c_e, .. } => *c_e = value,
            EngineSpec::Shuss { c_s, .. } => *c_s = value,
        }
        out
    }

    pub fn choose_move(&self, state: &PGameState, evals: usize) -> Result<usize, SearchError> {
        match self {
            EngineSpec::Puct { c } => Ok(search::puct_search(state, evals, *c, None)?.chosen),
            EngineSpec::PuctTerm { c_e, term, weight } => {
                let root_term = RootTerm {
                    term: term.clone(),
                    weight: *weight,
                };
                Ok(search::puct_search(state, evals, *c_e, Some(root_term))?.chosen)
            }
            EngineSpec::Shuss { c_s, top_k, term } => {
                search::shuss_move(state, &ShussConfig::new(evals, *top_k, *c_s, term.clone()))
            }
        }
    }
}

/// Starting position of a game.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Opening {
    pub seed: u64,
    pub shape: TreeShape,
    pub path: Vec<usize>,
}

impl Opening {
    pub fn state(&self) -> Result<PGameState, GameError> {
        PGameState::from_path(self.seed, self.shape, &self.path)
    }
}

/// Draws `count` openings of `plies` prior-sampled moves whose heuristic
/// value lies within `tolerance` of an even game.
pub fn balanced_openings(
    count: usize,
    seed: u64,
    shape: TreeShape,
    plies: usize,
    tolerance: f64,
) -> Result<Vec<Opening>, GameError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let tree_seed = rng.next_u64();
        let mut state = PGameState::root(tree_seed, shape)?;
        for _ in 0..plies {
            if state.is_terminal() {
                break;
            }
            let priors = state.heuristic_eval().priors;
            let mv = WeightedIndex::new(&priors)
                .map(|d| d.sample(&mut rng))
                .unwrap_or(0);
            state.play(mv)?;
        }
        if state.is_terminal() {
            continue;
        }
        if (state.heuristic_eval().value - 0.5).abs() <= tolerance {
            out.push(Opening {
                seed: tree_seed,
                shape,
                path: state.path().to_vec(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GameRecord {
    pub seed: u64,
    pub opening: Vec<usize>,
    pub moves: Vec<usize>,
    /// `true` when engine A moved first from the opening.
    pub a_first: bool,
    /// Terminal outcome for the side that moved first.
    pub first_value: f64,
    pub a_won: bool,
}

/// Plays one game from `opening`; `first` moves first.
pub fn play_game(
    opening: &Opening,
    a: &EngineSpec,
    b: &EngineSpec,
    a_first: bool,
    evals: usize,
) -> Result<GameRecord, SearchError> {
    let mut state = opening.state()?;
    let first_player = state.to_move();
    let mut moves = Vec::new();
    while !state.is_terminal() {
        let a_to_move = (state.to_move() == first_player) == a_first;
        let engine = if a_to_move { a } else { b };
        let mv = engine.choose_move(&state, evals)?;
        state.play(mv)?;
        moves.push(mv);
    }
    let v = state.first_player_value();
    let first_value = if first_player == 0 { v } else { 1.0 - v };
    let first_won = first_value >= 0.5;
    Ok(GameRecord {
        seed: opening.seed,
        opening: opening.path.clone(),
        moves,
        a_first,
        first_value,
        a_won: first_won == a_first,
    })
}

/// Wilson score interval at 95% for `wins` out of `games`.
pub fn wilson_interval(wins: usize, games: usize) -> (f64, f64) {
    if games == 0 {
        return (0.0, 1.0);
    }
    const Z: f64 = 1.959_963_984_540_054;
    let n = games as f64;
    let p = wins as f64 / n;
    let denom = 1.0 + Z * Z / n;
    let center = (p + Z * Z / (2.0 * n)) / denom;
    let half = Z * libm::sqrt(p * (1.0 - p) / n + Z * Z / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
    }

    #[test]
    fn openings_are_balanced_and_deterministic() {
        let shape = TreeShape::new(4, 8);
        let a = balanced_openings(12, 3, shape, 2, 0.05).unwrap();
        assert_eq!(a, balanced_openings(12, 3, shape, 2, 0.05).unwrap());
        for o in &a {
            assert_eq!(o.path.len(), 2);
            let v = o.state().unwrap().heuristic_eval().value;
            assert!((v - 0.5).abs() <= 0.05);
        }
    }

    #[test]
    fn mirrored_engines_split_a_pair() {
        let shape = TreeShape::new(3, 5);
        let opening = balanced_openings(1, 8, shape, 1, 0.2).unwrap().remove(0);
        let e = EngineSpec::Puct { c: 0.2 };
        let g1 = play_game(&opening, &e, &e, true, 8).unwrap();
        let g2 = play_game(&opening, &e, &e, false, 8).unwrap();
        assert_eq!(g1.moves, g2.moves);
        assert_eq!(g1.moves.len(), 4);
        assert_ne!(g1.a_won, g2.a_won);
    }

    #[test]
    fn constants_swap() {
        let e = EngineSpec::Shuss {
            c_s: 0.2,
            top_k: 5,
            term: Expression::parse("sc").unwrap(),
        };
        assert_eq!(e.with_constant(0.35).constant(), 0.35);
    }
}
