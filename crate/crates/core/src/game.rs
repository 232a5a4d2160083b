//! Deterministic synthetic two-player game over a hash-valued tree.
//!
//! Every node of a tree of branching `B` and depth `D` gets a value `h` in
//! `[0, 1)` by folding its path into a SplitMix64 state. The move into a
//! node shifts a running balance by `h - 0.5`: up when the first player
//! made it, down for the second player. A position is worth
//! `0.5 + 0.5 · tanh(2 · balance)` to the first player, and at a terminal
//! position the first player wins when that is at least 0.5.

use alloc::vec::Vec;

use thiserror::Error;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const PRIOR_TEMPERATURE: f64 = 0.3;
const LOOKAHEAD: usize = 2;
const ORACLE_LIMIT: f64 = 1e7;
const SHARPNESS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("move {mv} out of range for branching {branching}")]
    BadMove { mv: usize, branching: usize },
    #[error("position is terminal")]
    Terminal,
    #[error("subtree has {0:e} leaves, oracle limit is 1e7")]
    TreeTooLarge(f64),
    #[error("branching must be at least 2, got {0}")]
    BadBranching(usize),
}

/// One SplitMix64 output step from state `x`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn fold_step(state: u64, mv: usize) -> u64 {
    splitmix64(state ^ (mv as u64 + 1))
}

#[inline]
fn unit_interval(state: u64) -> f64 {
    (state >> 11) as f64 / (1u64 << 53) as f64
}

/// Hash value of the node reached by `path` in the tree `seed`, in `[0, 1)`.
pub fn hash_value(seed: u64, path: &[usize]) -> f64 {
    let state = path.iter().fold(splitmix64(seed), |s, &mv| fold_step(s, mv));
    unit_interval(state)
}

/// Compact node summary: everything needed to derive children and values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeKey {
    fold: u64,
    /// Signed sum of centered move values, first player positive.
    balance: f64,
    ply: usize,
}

impl NodeKey {
    fn root(seed: u64) -> Self {
        NodeKey {
            fold: splitmix64(seed),
            balance: 0.0,
            ply: 0,
        }
    }

    pub fn ply(&self) -> usize {
        self.ply
    }

    /// 0 for the first player, 1 for the second.
    pub fn to_move(&self) -> usize {
        self.ply % 2
    }

    pub(crate) fn child(&self, mv: usize) -> NodeKey {
        let fold = fold_step(self.fold, mv);
        let gain = unit_interval(fold) - 0.5;
        let sign = if self.to_move() == 0 { 1.0 } else { -1.0 };
        NodeKey {
            fold,
            balance: self.balance + sign * gain,
            ply: self.ply + 1,
        }
    }
}

/// Shape of a synthetic game tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeShape {
    pub branching: usize,
    pub depth: usize,
}

impl TreeShape {
    pub fn new(branching: usize, depth: usize) -> Self {
        TreeShape { branching, depth }
    }

    pub fn is_terminal(&self, key: &NodeKey) -> bool {
        key.ply >= self.depth
    }

    /// Value of the position for the first player; exact at terminal positions.
    pub fn first_player_value(&self, key: &NodeKey) -> f64 {
        0.5 + 0.5 * libm::tanh(SHARPNESS * key.balance)
    }

    /// Static value from the perspective of the player to move at `key`.
    pub fn static_value(&self, key: &NodeKey) -> f64 {
        let v = self.first_player_value(key);
        if key.to_move() == 0 {
            v
        } else {
            1.0 - v
        }
    }

    fn lookahead(&self, key: &NodeKey, plies: usize) -> f64 {
        if plies == 0 || self.is_terminal(key) {
            return self.static_value(key);
        }
        (0..self.branching)
            .map(|mv| 1.0 - self.lookahead(&key.child(mv), plies - 1))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Heuristic value and child priors of a position.
    pub fn evaluate(&self, key: &NodeKey) -> HeuristicEval {
        if self.is_terminal(key) {
            return HeuristicEval {
                value: self.static_value(key),
                priors: Vec::new(),
            };
        }
        let value = self.lookahead(key, LOOKAHEAD);
        let gains: Vec<f64> = (0..self.branching)
            .map(|mv| 1.0 - self.static_value(&key.child(mv)))
            .collect();
        HeuristicEval {
            value,
            priors: softmax(&gains, PRIOR_TEMPERATURE),
        }
    }

    /// Exact negamax value from the perspective of the player to move.
    pub fn negamax(&self, key: &NodeKey) -> f64 {
        if self.is_terminal(key) {
            return self.static_value(key);
        }
        (0..self.branching)
            .map(|mv| 1.0 - self.negamax(&key.child(mv)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn softmax(values: &[f64], temperature: f64) -> Vec<f64> {
    let top = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out: Vec<f64> = values
        .iter()
        .map(|v| libm::exp((v - top) / temperature))
        .collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

/// Value and move priors for one position.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicEval {
    /// In `[0, 1]`, from the perspective of the player to move.
    pub value: f64,
    /// Empty for terminal positions; otherwise sums to 1.
    pub priors: Vec<f64>,
}

/// A position in a synthetic game tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PGameState {
    seed: u64,
    shape: TreeShape,
    path: Vec<usize>,
    key: NodeKey,
}

impl PGameState {
    pub fn root(seed: u64, shape: TreeShape) -> Result<Self, GameError> {
        if shape.branching < 2 {
            return Err(GameError::BadBranching(shape.branching));
        }
        Ok(PGameState {
            seed,
            shape,
            path: Vec::new(),
            key: NodeKey::root(seed),
        })
    }

    pub fn from_path(seed: u64, shape: TreeShape, path: &[usize]) -> Result<Self, GameError> {
        let mut state = PGameState::root(seed, shape)?;
        for &mv in path {
            state.play(mv)?;
        }
        Ok(state)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn path(&self) -> &[usize] {
        &self.path
    }

    pub fn key(&self) -> &NodeKey {
        &self.key
    }

    pub fn to_move(&self) -> usize {
        self.key.to_move()
    }

    pub fn is_terminal(&self) -> bool {
        self.shape.is_terminal(&self.key)
    }

    pub fn play(&mut self, mv: usize) -> Result<(), GameError> {
        if self.is_terminal() {
            return Err(GameError::Terminal);
        }
        if mv >= self.shape.branching {
            return Err(GameError::BadMove {
                mv,
                branching: self.shape.branching,
            });
        }
        self.key = self.key.child(mv);
        self.path.push(mv);
        Ok(())
    }

    pub fn child(&self, mv: usize) -> Result<PGameState, GameError> {
        let mut next = self.clone();
        next.play(mv)?;
        Ok(next)
    }

    /// Outcome for the first player; exact only at terminal positions.
    pub fn first_player_value(&self) -> f64 {
        self.shape.first_player_value(&self.key)
    }

    pub fn heuristic_eval(&self) -> HeuristicEval {
        self.shape.evaluate(&self.key)
    }

    /// Full-tree negamax value from the perspective of the player to move.
    pub fn negamax_oracle(&self) -> Result<f64, GameError> {
        let remaining = self.shape.depth.saturating_sub(self.key.ply);
        let leaves = libm::pow(self.shape.branching as f64, remaining as f64);
        if leaves > ORACLE_LIMIT {
            return Err(GameError::TreeTooLarge(leaves));
        }
        Ok(self.shape.negamax(&self.key))
    }

    /// Moves whose exact value equals the best available one.
    pub fn optimal_moves(&self) -> Result<Vec<usize>, GameError> {
        if self.is_terminal() {
            return Err(GameError::Terminal);
        }
        let values: Vec<f64> = (0..self.shape.branching)
            .map(|mv| self.child(mv).and_then(|c| c.negamax_oracle()).map(|v| 1.0 - v))
            .collect::<Result<_, _>>()?;
        let best = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        Ok((0..values.len()).filter(|&i| values[i] == best).collect())
    }
}
