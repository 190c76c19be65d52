//! Quantities computed from finished traces: stable regret, market
//! instability, confidence-bound mistakes and cross-replication aggregates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::PlayerBanditState;
use crate::engine::Trace;
use crate::market::{ArmId, Market, PlayerId};
use crate::stable_matching::{is_stable, StableSet};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no series to aggregate")]
    Empty,
    #[error("series {index} has length {found}, expected {expected}")]
    LengthMismatch { index: usize, expected: usize, found: usize },
}

/// Cumulative regret per player; `per_player[i][t - 1]` is the regret of
/// player `i` after round `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub per_player: Vec<Vec<f64>>,
}

impl RegretSeries {
    pub fn final_values(&self) -> Vec<f64> {
        self.per_player.iter().map(|s| s.last().copied().unwrap_or(0.0)).collect()
    }

    pub fn at(&self, player: PlayerId, t: usize) -> f64 {
        self.per_player[player.0][t - 1]
    }

    /// Round-by-round maximum over players.
    pub fn max_over_players(&self) -> Vec<f64> {
        let horizon = self.per_player.first().map_or(0, Vec::len);
        (0..horizon)
            .map(|t| self.per_player.iter().map(|s| s[t]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

fn cumulative_regret(trace: &Trace, baseline: &[ArmId], reward: impl Fn(usize, usize) -> f64) -> RegretSeries {
    let market = &trace.market;
    let per_player = market
        .players()
        .map(|p| {
            let reference = market.mean(p, baseline[p.0]);
            let mut total = 0.0;
            (0..trace.rounds.len())
                .map(|t| {
                    total += reference - reward(t, p.0);
                    total
                })
                .collect()
        })
        .collect();
    RegretSeries { per_player }
}

/// Regret against a per-player baseline arm, using the true mean of the arm
/// actually pulled (0 when the player lost a conflict).
pub fn stable_regret(trace: &Trace, baseline: &[ArmId]) -> RegretSeries {
    let market = &trace.market;
    cumulative_regret(trace, baseline, |t, p| {
        trace.rounds[t].pulls[p].map_or(0.0, |a| market.mean(PlayerId(p), a))
    })
}

pub fn pessimal_regret(trace: &Trace, pessimal_match: &[ArmId]) -> RegretSeries {
    stable_regret(trace, pessimal_match)
}

pub fn optimal_regret(trace: &Trace, optimal_match: &[ArmId]) -> RegretSeries {
    stable_regret(trace, optimal_match)
}

/// Regret computed from the noisy rewards actually observed.
pub fn realized_regret(trace: &Trace, baseline: &[ArmId]) -> RegretSeries {
    cumulative_regret(trace, baseline, |t, p| trace.rounds[t].rewards[p])
}

/// Per-round indicator that the attempted profile is not a stable matching.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySeries {
    pub indicator: Vec<u8>,
    pub cumulative: Vec<u64>,
}

impl StabilitySeries {
    fn from_indicator(indicator: Vec<u8>) -> Self {
        let mut total = 0u64;
        let cumulative = indicator
            .iter()
            .map(|&x| {
                total += x as u64;
                total
            })
            .collect();
        StabilitySeries { indicator, cumulative }
    }

    pub fn unstable_rounds(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    /// Unstable rounds among rounds `from..=to` (1-based, inclusive).
    pub fn unstable_between(&self, from: usize, to: usize) -> u64 {
        self.indicator[from - 1..to].iter().map(|&x| x as u64).sum()
    }
}

/// Instability of every round, checked directly for blocking pairs so it
/// works for markets too large to enumerate.
pub fn instability(trace: &Trace) -> StabilitySeries {
    StabilitySeries::from_indicator(
        trace
            .rounds
            .iter()
            .map(|r| u8::from(!is_stable(&trace.market, &r.attempts)))
            .collect(),
    )
}

/// Instability by membership in an enumerated stable set.
pub fn instability_against(trace: &Trace, stable: &StableSet) -> StabilitySeries {
    StabilitySeries::from_indicator(
        trace
            .rounds
            .iter()
            .map(|r| u8::from(!stable.contains(&r.attempts)))
            .collect(),
    )
}

/// Counts of confidence-bound mistakes and lost conflicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventCounters {
    /// `mistaken_pulls[i][j][k]`: rounds in which player `i` pulled arm `j`
    /// while its bound for `j` exceeded the bound for a truly better arm `k`.
    /// Zero whenever arm `j` is not worse than `k` for player `i`.
    pub mistaken_pulls: Vec<Vec<Vec<u64>>>,
    pub conflict_losses: Vec<u64>,
}

/// Rebuilds every player's statistics from the trace and counts, per round,
/// pulls of an arm whose bound beats a better arm's bound.
pub fn event_counters(trace: &Trace) -> EventCounters {
    let market: &Market = &trace.market;
    let (n, l) = (market.n_players(), market.n_arms());
    let mut states = vec![PlayerBanditState::new(l); n];
    let mut mistaken_pulls = vec![vec![vec![0u64; l]; l]; n];
    let mut conflict_losses = vec![0u64; n];
    for round in &trace.rounds {
        for p in market.players() {
            let state = &mut states[p.0];
            match round.pulls[p.0] {
                Some(j) => {
                    let uj = state.ucb_value(j, round.t);
                    for k in market.arms() {
                        if market.player_prefers(p, k, j) && uj > state.ucb_value(k, round.t) {
                            mistaken_pulls[p.0][j.0][k.0] += 1;
                        }
                    }
                    state.record_success(j, round.rewards[p.0]);
                }
                None => conflict_losses[p.0] += 1,
            }
        }
    }
    EventCounters { mistaken_pulls, conflict_losses }
}

/// Pointwise mean and population standard deviation across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn aggregate(series: &[Vec<f64>]) -> Result<Aggregate, MetricsError> {
    let first = series.first().ok_or(MetricsError::Empty)?;
    let len = first.len();
    if let Some((index, s)) = series.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(MetricsError::LengthMismatch { index, expected: len, found: s.len() });
    }
    let k = series.len() as f64;
    let mean: Vec<f64> = (0..len).map(|t| series.iter().map(|s| s[t]).sum::<f64>() / k).collect();
    let std = (0..len)
        .map(|t| (series.iter().map(|s| (s[t] - mean[t]).powi(2)).sum::<f64>() / k).sqrt())
        .collect();
    Ok(Aggregate { mean, std })
}

/// Regret ceiling for a player of a globally ranked market running CA-UCB
/// without delays:
/// `6 k^2 (ln T / Δ^2 + 1) ((L - k) μ_k(s) + k Σ_{i worse than s} (μ_k(s) − μ_k(i)))`,
/// where `k` is the player's 1-based rank, `s` its stable arm and `Δ` the
/// smallest mean gap in the market.
pub fn global_rank_regret_bound(market: &Market, stable: &[ArmId], player: PlayerId, horizon: u64) -> f64 {
    assert!(market.is_globally_ranked(), "bound only holds for globally ranked markets");
    let k = market.arm_rank(ArmId(0), player) + 1;
    let own = stable[player.0];
    let stable_mean = market.mean(player, own);
    let worse: f64 = market
        .arms()
        .filter(|&a| market.player_prefers(player, own, a))
        .map(|a| stable_mean - market.mean(player, a))
        .sum();
    let delta = market.min_gap();
    let k = k as f64;
    let l = market.n_arms() as f64;
    6.0 * k * k * ((horizon as f64).ln() / (delta * delta) + 1.0) * ((l - k) * stable_mean + k * worse)
}
