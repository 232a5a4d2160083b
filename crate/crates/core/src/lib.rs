//! Discovery of root exploration terms for Monte Carlo Tree Search.
//!
//! Candidate terms are small prefix expressions over move statistics
//! (`sc`, `pr`, `nbp`, `nb`). They are sampled by Monte Carlo search
//! ([`sampling`]), scored quickly by replaying Sequential Halving over cached
//! evaluation traces ([`dataset`], [`bandits`]) and validated in PUCT and
//! SHUSS games on a deterministic synthetic game ([`game`], [`search`],
//! [`arena`]).
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod arena;
pub mod bandits;
pub mod dataset;
pub mod exprlang;
pub mod game;
pub mod sampling;
pub mod search;

pub use bandits::{Arm, BanditError, CachedArm, HalvingSchedule, RootArm};
pub use dataset::{CachedState, Dataset, DatasetError, GenerationParams, Score, ScoringPolicy};
pub use exprlang::{Atom, EvalContext, ExprError, Expression};
pub use game::{PGameState, TreeShape};
pub use sampling::{AmafTable, SamplingMode};
pub use search::{SearchError, SearchTree};
