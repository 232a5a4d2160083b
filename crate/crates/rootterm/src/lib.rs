//! File formats, parallel runners and the command line for `rootterm-core`.

pub mod cache;
pub mod cli;
pub mod discover;
pub mod engine;
pub mod formats;
pub mod manifest;
pub mod matches;

pub use cache::SharedScoreCache;
pub use discover::{discover, DiscoveryConfig, DiscoveryLog, StopCondition, TableSharing};
pub use matches::{play_match, MatchConfig, MatchResult};
