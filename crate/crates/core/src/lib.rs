//! Decentralized conflict-avoiding UCB (CA-UCB) for two-sided matching
//! markets with bandit feedback.
//!
//! Players learn their mean rewards for arms through noisy pulls while arms
//! hold fixed, known preferences over players. When several players attempt
//! the same arm in a round, only the arm's most preferred attempter gets to
//! pull it. Each player restricts itself to a *plausible set* of arms it could
//! have won in the previous round, picks the one with the highest upper
//! confidence bound, and with probability `lambda` simply repeats its previous
//! attempt.
//!
//! The crate is organised as:
//!
//! - [`market`]: market definition, validation, JSON format and the random
//!   market generators.
//! - [`stable_matching`]: blocking pairs, deferred acceptance, brute-force
//!   enumeration of stable matchings and blocking-pair resolution.
//! - [`bandit`]: per-player statistics, the confidence bound and reward
//!   sampling.
//! - [`engine`]: the round loop with pluggable per-player policies.
//! - [`metrics`]: stable regret, instability and mistake counters.
//! - [`experiments`]: named presets and seeded replication orchestration.
//! - [`cli`]: the command implementations behind the `caucb` binary.
//!
//! Runnable walkthroughs live in `examples/`; see the README for the list.

pub mod bandit;
pub mod cli;
pub mod engine;
pub mod experiments;
pub mod market;
pub mod metrics;
pub mod rng;
pub mod stable_matching;

pub use bandit::{PlayerBanditState, RewardModel};
pub use engine::{run, AgentPolicy, RoundRecord, Simulation, SimulationConfig, TieBreak, Trace};
pub use market::{ArmId, Market, MarketData, PlayerId};
pub use stable_matching::{AttemptProfile, BlockingPair, Matching, StableSet};
