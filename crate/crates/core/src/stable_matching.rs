//! Stability machinery: blocking pairs, deferred acceptance, brute-force
//! enumeration of the stable set and blocking-pair resolution.
//!
//! Iteration order is always player index, then arm index.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{ArmId, Market, PlayerId};

/// Largest market (in arms) that [`enumerate_stable`] will brute-force.
pub const MAX_ENUMERATION_ARMS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("arm {arm} assigned to more than one player")]
    NotInjective { arm: ArmId },
    #[error("market with {0} arms is too large for enumeration (max {MAX_ENUMERATION_ARMS})")]
    TooLarge(usize),
    #[error("({}, {}) is not a blocking pair", .0.player, .0.arm)]
    NotBlocking(BlockingPair),
}

/// A partial injective map from players to arms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching {
    assignment: Vec<Option<ArmId>>,
}

impl Matching {
    pub fn new(assignment: Vec<Option<ArmId>>) -> Result<Self, MatchingError> {
        let mut seen = std::collections::HashSet::new();
        for a in assignment.iter().flatten() {
            if !seen.insert(*a) {
                return Err(MatchingError::NotInjective { arm: *a });
            }
        }
        Ok(Matching { assignment })
    }

    /// A matching in which every player is assigned.
    pub fn complete(arms: &[ArmId]) -> Result<Self, MatchingError> {
        Matching::new(arms.iter().copied().map(Some).collect())
    }

    pub fn unmatched(n_players: usize) -> Self {
        Matching { assignment: vec![None; n_players] }
    }

    pub fn get(&self, player: PlayerId) -> Option<ArmId> {
        self.assignment[player.0]
    }

    pub fn assignment(&self) -> &[Option<ArmId>] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// `holder[arm]` for every arm of an `n_arms` market.
    pub fn holders(&self, n_arms: usize) -> Vec<Option<PlayerId>> {
        let mut holders = vec![None; n_arms];
        for (p, a) in self.assignment.iter().enumerate() {
            if let Some(a) = a {
                holders[a.0] = Some(PlayerId(p));
            }
        }
        holders
    }

    /// The assignment as a total map, if every player is matched.
    pub fn as_total(&self) -> Option<Vec<ArmId>> {
        self.assignment.iter().copied().collect()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(p, a)| a.map(|a| (p, a.0)))
            .collect()
    }
}

/// What every player attempts in one round. Need not be injective.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttemptProfile {
    attempts: Vec<ArmId>,
}

impl AttemptProfile {
    pub fn new(attempts: Vec<ArmId>) -> Self {
        AttemptProfile { attempts }
    }

    pub fn get(&self, player: PlayerId) -> ArmId {
        self.attempts[player.0]
    }

    pub fn attempts(&self) -> &[ArmId] {
        &self.attempts
    }

    pub fn len(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attempts.is_empty()
    }

    pub fn is_injective(&self) -> bool {
        let mut sorted = self.attempts.clone();
        sorted.sort();
        sorted.windows(2).all(|w| w[0] != w[1])
    }

    /// The matching obtained by awarding every contested arm to its most
    /// preferred attempter; the other attempters stay unmatched.
    pub fn induced_matching(&self, market: &Market) -> Matching {
        let mut winner: Vec<Option<PlayerId>> = vec![None; market.n_arms()];
        for (p, &a) in self.attempts.iter().enumerate() {
            let p = PlayerId(p);
            match winner[a.0] {
                Some(w) if market.arm_prefers(a, w, p) => {}
                _ => winner[a.0] = Some(p),
            }
        }
        let mut assignment = vec![None; self.attempts.len()];
        for (a, w) in winner.iter().enumerate() {
            if let Some(w) = w {
                assignment[w.0] = Some(ArmId(a));
            }
        }
        Matching { assignment }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockingPair {
    pub player: PlayerId,
    pub arm: ArmId,
}

/// Whether `(player, arm)` blocks `matching`: the player strictly prefers the
/// arm to its current assignment (any arm beats being unmatched) and the arm
/// is free or strictly prefers the player to its current holder.
pub fn blocks(market: &Market, matching: &Matching, holders: &[Option<PlayerId>], pair: BlockingPair) -> bool {
    let BlockingPair { player, arm } = pair;
    let player_wants = match matching.get(player) {
        None => true,
        Some(current) => market.player_prefers(player, arm, current),
    };
    player_wants
        && match holders[arm.0] {
            None => true,
            Some(holder) => market.arm_prefers(arm, player, holder),
        }
}

/// All blocking pairs of `matching`, sorted by (player, arm).
pub fn blocking_pairs(market: &Market, matching: &Matching) -> Vec<BlockingPair> {
    let holders = matching.holders(market.n_arms());
    let mut out = Vec::new();
    for player in market.players() {
        for arm in market.arms() {
            let pair = BlockingPair { player, arm };
            if blocks(market, matching, &holders, pair) {
                out.push(pair);
            }
        }
    }
    out
}

/// True iff the attempts form a matching with no blocking pair.
pub fn is_stable(market: &Market, profile: &AttemptProfile) -> bool {
    profile.is_injective() && blocking_pairs(market, &profile.induced_matching(market)).is_empty()
}

/// Same as [`is_stable`] for an already-built matching.
pub fn is_stable_matching(market: &Market, matching: &Matching) -> bool {
    blocking_pairs(market, matching).is_empty()
}

/// For every player that appears in some blocking pair, the blocking pair
/// with that player's most preferred arm.
pub fn player_consistent_blocking_pairs(market: &Market, matching: &Matching) -> Vec<BlockingPair> {
    let mut best: Vec<Option<BlockingPair>> = vec![None; market.n_players()];
    for pair in blocking_pairs(market, matching) {
        let slot = &mut best[pair.player.0];
        match slot {
            Some(b) if !market.player_prefers(pair.player, pair.arm, b.arm) => {}
            _ => *slot = Some(pair),
        }
    }
    best.into_iter().flatten().collect()
}

/// Moves the blocking player onto the blocking arm; every other entry of the
/// profile is left as is.
pub fn resolve_blocking_pair(
    market: &Market,
    profile: &AttemptProfile,
    pair: BlockingPair,
) -> Result<AttemptProfile, MatchingError> {
    let matching = profile.induced_matching(market);
    let holders = matching.holders(market.n_arms());
    if !blocks(market, &matching, &holders, pair) {
        return Err(MatchingError::NotBlocking(pair));
    }
    let mut attempts = profile.attempts.clone();
    attempts[pair.player.0] = pair.arm;
    Ok(AttemptProfile { attempts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposingSide {
    Players,
    Arms,
}

/// Gale-Shapley deferred acceptance. Players proposing yields the
/// player-optimal stable matching, arms proposing the player-pessimal one.
pub fn deferred_acceptance(market: &Market, side: ProposingSide) -> Matching {
    match side {
        ProposingSide::Players => players_propose(market),
        ProposingSide::Arms => arms_propose(market),
    }
}

fn players_propose(market: &Market) -> Matching {
    let rankings: Vec<Vec<ArmId>> = market.players().map(|p| market.player_ranking(p)).collect();
    let mut next = vec![0usize; market.n_players()];
    let mut holder: Vec<Option<PlayerId>> = vec![None; market.n_arms()];
    let mut free: VecDeque<PlayerId> = market.players().collect();
    while let Some(p) = free.pop_front() {
        // complete lists and N <= L: a free player always has an arm left
        let arm = rankings[p.0][next[p.0]];
        next[p.0] += 1;
        match holder[arm.0] {
            None => holder[arm.0] = Some(p),
            Some(q) if market.arm_prefers(arm, p, q) => {
                holder[arm.0] = Some(p);
                free.push_back(q);
            }
            Some(_) => free.push_back(p),
        }
    }
    let mut assignment = vec![None; market.n_players()];
    for (a, h) in holder.iter().enumerate() {
        if let Some(p) = h {
            assignment[p.0] = Some(ArmId(a));
        }
    }
    Matching { assignment }
}

fn arms_propose(market: &Market) -> Matching {
    let mut next = vec![0usize; market.n_arms()];
    let mut held: Vec<Option<ArmId>> = vec![None; market.n_players()];
    let mut free: VecDeque<ArmId> = market.arms().collect();
    while let Some(arm) = free.pop_front() {
        let prefs = market.arm_prefs(arm);
        let Some(&p) = prefs.get(next[arm.0]) else {
            continue; // rejected by everyone; stays unmatched
        };
        next[arm.0] += 1;
        match held[p.0] {
            None => held[p.0] = Some(arm),
            Some(current) if market.player_prefers(p, arm, current) => {
                held[p.0] = Some(arm);
                free.push_back(current);
            }
            Some(_) => free.push_back(arm),
        }
    }
    Matching { assignment: held }
}

/// Every stable matching of a small market together with each player's best
/// (optimal) and worst (pessimal) stable partner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSet {
    pub matchings: Vec<Matching>,
    pub optimal_match: Vec<ArmId>,
    pub pessimal_match: Vec<ArmId>,
}

impl StableSet {
    pub fn contains(&self, profile: &AttemptProfile) -> bool {
        self.matchings
            .iter()
            .any(|m| m.assignment().iter().zip(profile.attempts()).all(|(a, b)| *a == Some(*b)))
    }

    pub fn is_unique(&self) -> bool {
        self.matchings.len() == 1
    }
}

/// Brute-force enumeration over all complete injective assignments.
///
/// Partial assignments never need checking: with complete preference lists
/// and `N <= L`, an unmatched player always forms a blocking pair with some
/// free arm.
pub fn enumerate_stable(market: &Market) -> Result<StableSet, MatchingError> {
    let (n, l) = (market.n_players(), market.n_arms());
    if l > MAX_ENUMERATION_ARMS {
        return Err(MatchingError::TooLarge(l));
    }
    let mut matchings = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; l];
    enumerate_rec(market, &mut current, &mut used, &mut matchings);

    let pick = |better: bool| -> Vec<ArmId> {
        market
            .players()
            .map(|p| {
                matchings
                    .iter()
                    .map(|m: &Matching| m.get(p).expect("stable matchings are complete"))
                    .reduce(|x, y| {
                        if market.player_prefers(p, y, x) == better {
                            y
                        } else {
                            x
                        }
                    })
                    .expect("stable matchings always exist")
            })
            .collect()
    };
    let optimal_match = pick(true);
    let pessimal_match = pick(false);
    Ok(StableSet { matchings, optimal_match, pessimal_match })
}

fn enumerate_rec(market: &Market, current: &mut Vec<ArmId>, used: &mut [bool], out: &mut Vec<Matching>) {
    if current.len() == market.n_players() {
        let m = Matching::complete(current).expect("construction keeps arms distinct");
        if is_stable_matching(market, &m) {
            out.push(m);
        }
        return;
    }
    for a in 0..market.n_arms() {
        if !used[a] {
            used[a] = true;
            current.push(ArmId(a));
            enumerate_rec(market, current, used, out);
            current.pop();
            used[a] = false;
        }
    }
}

/// Optimal and pessimal stable partners, by enumeration when the market is
/// small enough and otherwise from the two deferred-acceptance runs.
pub fn extreme_matches(market: &Market) -> (Vec<ArmId>, Vec<ArmId>) {
    match enumerate_stable(market) {
        Ok(set) => (set.optimal_match, set.pessimal_match),
        Err(_) => {
            let total = |m: Matching| m.as_total().expect("deferred acceptance matches every player");
            (
                total(deferred_acceptance(market, ProposingSide::Players)),
                total(deferred_acceptance(market, ProposingSide::Arms)),
            )
        }
    }
}
