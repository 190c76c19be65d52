//! Two-sided markets: players with mean rewards over arms, arms with strict
//! preference lists over players.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub usize);

impl PlayerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl ArmId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0 + 1)
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0 + 1)
    }
}

/// A broken market invariant.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Violation {
    #[error("market has no players")]
    NoPlayers,
    #[error("N > L: {n_players} players but only {n_arms} arms")]
    TooFewArms { n_players: usize, n_arms: usize },
    #[error("mean_rewards has {found} rows, expected {expected}")]
    RowCount { expected: usize, found: usize },
    #[error("mean_rewards row for player {player} has {found} entries, expected {expected}")]
    RowLength { player: usize, expected: usize, found: usize },
    #[error("mean reward of player {player} for arm {arm} is {value}, must be finite and > 0")]
    NonPositiveMean { player: usize, arm: usize, value: f64 },
    #[error("duplicate means for player {player}: arms {first} and {second}")]
    DuplicateMeans { player: usize, first: usize, second: usize },
    #[error("arm_prefs has {found} lists, expected {expected}")]
    PrefListCount { expected: usize, found: usize },
    #[error("preference list of arm {arm} is not a permutation of all players")]
    NotAPermutation { arm: usize },
}

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invalid market: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("N > L: cannot generate a market with {n_players} players and {n_arms} arms")]
    TooFewArms { n_players: usize, n_arms: usize },
    #[error("mean reward {0:?} is not a decimal number")]
    BadDecimal(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// A mean reward as it appears in a market file: either a JSON number or a
/// decimal string such as `"2.5"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanValue {
    Number(f64),
    Text(String),
}

impl MeanValue {
    pub fn to_f64(&self) -> Result<f64, MarketError> {
        match self {
            MeanValue::Number(x) => Ok(*x),
            MeanValue::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| MarketError::BadDecimal(s.clone())),
        }
    }
}

/// The on-disk market format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketData {
    pub n_players: usize,
    pub n_arms: usize,
    pub mean_rewards: Vec<Vec<MeanValue>>,
    pub arm_prefs: Vec<Vec<usize>>,
}

impl MarketData {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market data is always serializable")
    }

    fn numeric_means(&self) -> Result<Vec<Vec<f64>>, MarketError> {
        self.mean_rewards
            .iter()
            .map(|row| row.iter().map(MeanValue::to_f64).collect())
            .collect()
    }
}

/// Checks every market invariant and returns all violations found.
pub fn validate(
    n_players: usize,
    n_arms: usize,
    mean_rewards: &[Vec<f64>],
    arm_prefs: &[Vec<usize>],
) -> Vec<Violation> {
    let mut out = Vec::new();
    if n_players == 0 {
        out.push(Violation::NoPlayers);
    }
    if n_players > n_arms {
        out.push(Violation::TooFewArms { n_players, n_arms });
    }
    if mean_rewards.len() != n_players {
        out.push(Violation::RowCount { expected: n_players, found: mean_rewards.len() });
    }
    for (player, row) in mean_rewards.iter().enumerate() {
        if row.len() != n_arms {
            out.push(Violation::RowLength { player, expected: n_arms, found: row.len() });
        }
        for (arm, &value) in row.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                out.push(Violation::NonPositiveMean { player, arm, value });
            }
        }
        for first in 0..row.len() {
            for second in first + 1..row.len() {
                if row[first] == row[second] {
                    out.push(Violation::DuplicateMeans { player, first, second });
                }
            }
        }
    }
    if arm_prefs.len() != n_arms {
        out.push(Violation::PrefListCount { expected: n_arms, found: arm_prefs.len() });
    }
    for (arm, list) in arm_prefs.iter().enumerate() {
        let mut seen = vec![false; n_players];
        let ok = list.len() == n_players
            && list.iter().all(|&p| p < n_players && !std::mem::replace(&mut seen[p], true));
        if !ok {
            out.push(Violation::NotAPermutation { arm });
        }
    }
    out
}

/// A validated market.
///
/// Player preferences are implied by `mean_rewards`: a player prefers the arm
/// with the larger mean. Arm preferences are explicit lists, most preferred
/// player first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketData", into = "MarketData")]
pub struct Market {
    n_players: usize,
    n_arms: usize,
    mean_rewards: Vec<Vec<f64>>,
    arm_prefs: Vec<Vec<PlayerId>>,
    /// `arm_rank[arm][player]` is the player's position in the arm's list.
    arm_rank: Vec<Vec<usize>>,
}

impl Market {
    pub fn new(mean_rewards: Vec<Vec<f64>>, arm_prefs: Vec<Vec<usize>>) -> Result<Self, MarketError> {
        let n_players = mean_rewards.len();
        let n_arms = arm_prefs.len();
        let violations = validate(n_players, n_arms, &mean_rewards, &arm_prefs);
        if !violations.is_empty() {
            return Err(MarketError::Invalid(violations));
        }
        let mut arm_rank = vec![vec![0; n_players]; n_arms];
        for (arm, list) in arm_prefs.iter().enumerate() {
            for (pos, &p) in list.iter().enumerate() {
                arm_rank[arm][p] = pos;
            }
        }
        Ok(Market {
            n_players,
            n_arms,
            mean_rewards,
            arm_prefs: arm_prefs
                .into_iter()
                .map(|l| l.into_iter().map(PlayerId).collect())
                .collect(),
            arm_rank,
        })
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn players(&self) -> impl Iterator<Item = PlayerId> {
        (0..self.n_players).map(PlayerId)
    }

    pub fn arms(&self) -> impl Iterator<Item = ArmId> {
        (0..self.n_arms).map(ArmId)
    }

    pub fn mean(&self, player: PlayerId, arm: ArmId) -> f64 {
        self.mean_rewards[player.0][arm.0]
    }

    pub fn mean_row(&self, player: PlayerId) -> &[f64] {
        &self.mean_rewards[player.0]
    }

    pub fn mean_rewards(&self) -> &[Vec<f64>] {
        &self.mean_rewards
    }

    pub fn arm_prefs(&self, arm: ArmId) -> &[PlayerId] {
        &self.arm_prefs[arm.0]
    }

    /// Position of `player` in `arm`'s list; 0 is the most preferred.
    pub fn arm_rank(&self, arm: ArmId, player: PlayerId) -> usize {
        self.arm_rank[arm.0][player.0]
    }

    /// True when `arm` strictly prefers `a` to `b`.
    pub fn arm_prefers(&self, arm: ArmId, a: PlayerId, b: PlayerId) -> bool {
        self.arm_rank(arm, a) < self.arm_rank(arm, b)
    }

    /// True when `player` strictly prefers arm `a` to arm `b`.
    pub fn player_prefers(&self, player: PlayerId, a: ArmId, b: ArmId) -> bool {
        self.mean(player, a) > self.mean(player, b)
    }

    /// Arms in the player's order of preference, best first.
    pub fn player_ranking(&self, player: PlayerId) -> Vec<ArmId> {
        let row = self.mean_row(player);
        let mut arms: Vec<ArmId> = self.arms().collect();
        arms.sort_by(|a, b| row[b.0].total_cmp(&row[a.0]));
        arms
    }

    /// All arms share one preference list over players.
    pub fn is_globally_ranked(&self) -> bool {
        self.arm_prefs.windows(2).all(|w| w[0] == w[1])
    }

    /// Smallest absolute difference between two of a player's means, over all
    /// players. Infinite for single-arm markets.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for row in &self.mean_rewards {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            for w in sorted.windows(2) {
                gap = gap.min(w[1] - w[0]);
            }
        }
        gap
    }

    /// Reward gaps of every player relative to a reference assignment
    /// (usually the stable matching).
    pub fn gaps(&self, reference: &[ArmId]) -> Gaps {
        assert_eq!(reference.len(), self.n_players, "reference must assign every player");
        let unmatched: Vec<f64> = self
            .players()
            .map(|p| self.mean(p, reference[p.0]))
            .collect();
        let pair = self
            .players()
            .map(|p| self.arms().map(|a| unmatched[p.0] - self.mean(p, a)).collect())
            .collect();
        Gaps { delta_min: self.min_gap(), pair, unmatched }
    }

    pub fn to_data(&self) -> MarketData {
        MarketData {
            n_players: self.n_players,
            n_arms: self.n_arms,
            mean_rewards: self
                .mean_rewards
                .iter()
                .map(|row| row.iter().map(|&x| MeanValue::Number(x)).collect())
                .collect(),
            arm_prefs: self
                .arm_prefs
                .iter()
                .map(|l| l.iter().map(|p| p.0).collect())
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let data = MarketData::from_json(text)?;
        Ok(Market::try_from(data)?)
    }

    pub fn to_json(&self) -> String {
        self.to_data().to_json()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot parse market JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Market(#[from] MarketError),
}

impl TryFrom<MarketData> for Market {
    type Error = MarketError;

    fn try_from(data: MarketData) -> Result<Self, Self::Error> {
        let means = data.numeric_means()?;
        let mut violations = Vec::new();
        if means.len() != data.n_players {
            violations.push(Violation::RowCount { expected: data.n_players, found: means.len() });
        }
        if data.arm_prefs.len() != data.n_arms {
            violations.push(Violation::PrefListCount {
                expected: data.n_arms,
                found: data.arm_prefs.len(),
            });
        }
        violations.extend(validate(data.n_players, data.n_arms, &means, &data.arm_prefs));
        if !violations.is_empty() {
            violations.dedup();
            return Err(MarketError::Invalid(violations));
        }
        Market::new(means, data.arm_prefs)
    }
}

impl From<Market> for MarketData {
    fn from(m: Market) -> Self {
        m.to_data()
    }
}

/// Reward gaps relative to a reference assignment `m`:
/// `pair[i][j] = μ_i(m(i)) − μ_i(j)` and `unmatched[i] = μ_i(m(i))`, the gap
/// to going unmatched.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaps {
    pub delta_min: f64,
    pub pair: Vec<Vec<f64>>,
    pub unmatched: Vec<f64>,
}

fn random_arm_prefs(n: usize, l: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..l)
        .map(|_| {
            let mut list: Vec<usize> = (0..n).collect();
            list.shuffle(rng);
            list
        })
        .collect()
}

/// Uniform ordinal preferences on both sides; each player's means are a
/// uniform permutation of `1..=l`.
pub fn gen_uniform(n: usize, l: usize, rng: &mut impl Rng) -> Result<Market, MarketError> {
    if n > l {
        return Err(MarketError::TooFewArms { n_players: n, n_arms: l });
    }
    let means = (0..n)
        .map(|_| {
            let mut row: Vec<f64> = (1..=l).map(|x| x as f64).collect();
            row.shuffle(rng);
            row
        })
        .collect();
    let prefs = random_arm_prefs(n, l, rng);
    Market::new(means, prefs)
}

/// Standard logistic draw by inverse CDF.
pub fn sample_logistic(rng: &mut impl Rng) -> f64 {
    // open interval so both logs stay finite
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    (u / (1.0 - u)).ln()
}

/// Correlated player preferences from a random-utility model.
///
/// Every arm draws a common quality `x ~ U[0,1]`; player `k` values arm `i`
/// at `beta * x_i + eps_{i,k}` with logistic noise, and the means are the
/// ranks `1..=l` of these utilities. Arm preferences are uniform as in
/// [`gen_uniform`]. Utility ties are broken by arm index.
pub fn gen_correlated(n: usize, l: usize, beta: f64, rng: &mut impl Rng) -> Result<Market, MarketError> {
    if n > l {
        return Err(MarketError::TooFewArms { n_players: n, n_arms: l });
    }
    let quality: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
    let means = (0..n)
        .map(|_| {
            let utility: Vec<f64> = quality.iter().map(|&x| beta * x + sample_logistic(rng)).collect();
            let mut order: Vec<usize> = (0..l).collect();
            order.sort_by(|&a, &b| utility[a].total_cmp(&utility[b]).then(a.cmp(&b)));
            let mut row = vec![0.0; l];
            for (rank, &arm) in order.iter().enumerate() {
                row[arm] = (rank + 1) as f64;
            }
            row
        })
        .collect();
    let prefs = random_arm_prefs(n, l, rng);
    Market::new(means, prefs)
}

/// Uniform player preferences with every arm ranking players by index
/// (player 0 most preferred).
pub fn gen_globally_ranked(n: usize, l: usize, rng: &mut impl Rng) -> Result<Market, MarketError> {
    let m = gen_uniform(n, l, rng)?;
    let prefs = vec![(0..n).collect(); l];
    Market::new(m.mean_rewards, prefs)
}

/// The fixed markets used by the presets and tests.
pub mod examples {
    use super::Market;

    /// Two players, two arms; both players prefer a1; a1 prefers p1, a2
    /// prefers p2.
    pub fn two_player() -> Market {
        Market::new(vec![vec![2.0, 1.0], vec![2.0, 1.0]], vec![vec![0, 1], vec![1, 0]])
            .expect("valid")
    }

    /// Three players and arms with cyclic preferences and two stable
    /// matchings.
    pub fn three_player_cycle() -> Market {
        Market::new(
            vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0]],
            vec![vec![2, 1, 0], vec![0, 2, 1], vec![1, 0, 2]],
        )
        .expect("valid")
    }

    /// Three players where p3 can gain by deviating from CA-UCB. `p3_means`
    /// are p3's means for (a1, a2, a3) and must keep a1 > a3 > a2.
    pub fn deviator_market(p3_means: [f64; 3]) -> Market {
        Market::new(
            vec![vec![3.0, 1.0, 2.0], vec![2.0, 3.0, 1.0], p3_means.to_vec()],
            vec![vec![1, 0, 2], vec![2, 1, 0], vec![2, 0, 1]],
        )
        .expect("valid")
    }

    pub const DEVIATOR_P3_MEANS: [f64; 3] = [10.0, 1.0, 2.0];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn example_markets_are_valid() {
        let m = examples::two_player();
        assert!(validate(2, 2, m.mean_rewards(), &m.to_data().arm_prefs).is_empty());
        examples::three_player_cycle();
        examples::deviator_market(examples::DEVIATOR_P3_MEANS);
    }

    #[test]
    fn duplicate_means_are_rejected() {
        let v = validate(1, 2, &[vec![1.0, 1.0]], &[vec![0], vec![0]]);
        assert_eq!(v, vec![Violation::DuplicateMeans { player: 0, first: 0, second: 1 }]);
        assert!(v[0].to_string().contains("duplicate means for player"));
    }

    #[test]
    fn more_players_than_arms_is_rejected() {
        let means = vec![vec![1.0, 2.0]; 3];
        let v = validate(3, 2, &means, &[vec![0, 1, 2], vec![2, 1, 0]]);
        assert!(v.contains(&Violation::TooFewArms { n_players: 3, n_arms: 2 }));
        assert!(v[0].to_string().contains("N > L"));
    }

    #[test]
    fn other_violations() {
        let v = validate(2, 2, &[vec![0.0, 1.0], vec![1.0]], &[vec![0, 0], vec![1, 0]]);
        assert!(v.contains(&Violation::NonPositiveMean { player: 0, arm: 0, value: 0.0 }));
        assert!(v.contains(&Violation::RowLength { player: 1, expected: 2, found: 1 }));
        assert!(v.contains(&Violation::NotAPermutation { arm: 0 }));
        assert!(!v.contains(&Violation::NotAPermutation { arm: 1 }));
    }

    #[test]
    fn player_ranking_of_deviator_market() {
        let m = examples::deviator_market(examples::DEVIATOR_P3_MEANS);
        assert_eq!(m.player_ranking(PlayerId(0)), vec![ArmId(0), ArmId(2), ArmId(1)]);
        let single = Market::new(vec![vec![4.0]], vec![vec![0]]).unwrap();
        assert_eq!(single.player_ranking(PlayerId(0)), vec![ArmId(0)]);
    }

    #[test]
    fn smallest_uniform_market() {
        let m = gen_uniform(1, 1, &mut rng::stream(3, 0)).unwrap();
        assert_eq!(m.mean_rewards(), &[vec![1.0]]);
        assert_eq!(m.arm_prefs(ArmId(0)), &[PlayerId(0)]);
    }

    #[test]
    fn generators_reject_n_greater_than_l() {
        let mut r = rng::stream(0, 0);
        assert!(matches!(gen_uniform(3, 2, &mut r), Err(MarketError::TooFewArms { .. })));
        assert!(matches!(gen_correlated(3, 2, 1.0, &mut r), Err(MarketError::TooFewArms { .. })));
    }

    #[test]
    fn json_accepts_decimal_strings() {
        let text = r#"{"n_players":1,"n_arms":2,"mean_rewards":[["0.1","2.5"]],"arm_prefs":[[0],[0]]}"#;
        let m = Market::from_json(text).unwrap();
        assert_eq!(m.mean_row(PlayerId(0)), &[0.1, 2.5]);
        let back = Market::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_reports_violations() {
        let text = r#"{"n_players":2,"n_arms":2,"mean_rewards":[[1,1],[1,2]],"arm_prefs":[[0,1],[0,1]]}"#;
        let err = Market::from_json(text).unwrap_err();
        assert!(err.to_string().contains("duplicate means"));
        assert!(Market::from_json("{").is_err());
        let bad = r#"{"n_players":1,"n_arms":1,"mean_rewards":[["x"]],"arm_prefs":[[0]]}"#;
        assert!(matches!(Market::from_json(bad), Err(LoadError::Market(MarketError::BadDecimal(_)))));
    }

    #[test]
    fn gaps_relative_to_reference() {
        let m = examples::deviator_market(examples::DEVIATOR_P3_MEANS);
        let g = m.gaps(&[ArmId(0), ArmId(1), ArmId(2)]);
        assert_eq!(g.unmatched, vec![3.0, 3.0, 2.0]);
        assert_eq!(g.pair[2], vec![-8.0, 1.0, 0.0]);
        assert_eq!(g.delta_min, 1.0);
    }

    #[test]
    fn global_ranking_predicate() {
        let mut r = rng::stream(1, 0);
        assert!(gen_globally_ranked(4, 5, &mut r).unwrap().is_globally_ranked());
        assert!(!examples::three_player_cycle().is_globally_ranked());
    }
}
