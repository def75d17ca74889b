//! Hyper-parameter search and per-instant model suites.

mod search;
mod space;
mod suite;

pub use search::{
    derive_seed, evaluate_configs, grid_search, random_search, Leaderboard, LeaderboardEntry, SearchOutcome,
};
pub use space::{IntRange, SearchRanges, SearchSpace};
pub use suite::{train_sfixed_suite, ConfigSource, SfixedSuite, SuiteCost, SuiteMember, SUITE_FILE};
