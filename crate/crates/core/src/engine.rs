//! The CA-UCB round loop.
//!
//! Each round every player draws a delay bit. A delayed player repeats its
//! previous *attempt*. Otherwise it builds its plausible set (arms it could
//! have won last round given who pulled them) and attempts the arm its policy
//! ranks highest there. Contested arms go to the attempter the arm prefers;
//! only winners observe a reward and update their statistics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{PlayerBanditState, RewardModel};
use crate::market::{ArmId, Market, PlayerId};
use crate::rng::{self, SimRng};
use crate::stable_matching::AttemptProfile;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("delay probability must lie in [0, 1), got {0}")]
    Lambda(f64),
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("noise sigma must be finite and >= 0, got {0}")]
    Sigma(f64),
    #[error("{found} policies given for {expected} players")]
    PolicyCount { expected: usize, found: usize },
    #[error("{found} initial attempts given for {expected} players")]
    InitialAttemptCount { expected: usize, found: usize },
    #[error("policy or initial attempt refers to arm {arm}, market has {n_arms} arms")]
    ArmOutOfRange { arm: usize, n_arms: usize },
    #[error("unknown policy {0:?} (expected ca_ucb, oracle_rank, deviator or fixed:<arm>)")]
    UnknownPolicy(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Among equal scores pick the smallest arm index.
    #[default]
    LowestIndex,
    HighestIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Delay probability.
    pub lambda: f64,
    pub horizon: u64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    pub seed: u64,
    /// Round-1 attempts for every player, replacing the uniform draw.
    #[serde(default)]
    pub initial_attempts: Option<Vec<ArmId>>,
    #[serde(default)]
    pub tie_break: TieBreak,
}

fn default_sigma() -> f64 {
    1.0
}

impl SimulationConfig {
    pub fn new(lambda: f64, horizon: u64, seed: u64) -> Self {
        SimulationConfig {
            lambda,
            horizon,
            noise_sigma: 1.0,
            seed,
            initial_attempts: None,
            tie_break: TieBreak::default(),
        }
    }

    pub fn with_initial_attempts(mut self, arms: &[usize]) -> Self {
        self.initial_attempts = Some(arms.iter().map(|&a| ArmId(a)).collect());
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(EngineError::Lambda(self.lambda));
        }
        if self.horizon == 0 {
            return Err(EngineError::Horizon);
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(EngineError::Sigma(self.noise_sigma));
        }
        Ok(())
    }
}

/// The fixed action sequence of a player that games conflict avoidance: take
/// `lure`, then `feint` (or `lure` again when the delay bit is set), then
/// `target`, repeating with period three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviatorScript {
    pub lure: ArmId,
    pub feint: ArmId,
    pub target: ArmId,
}

impl Default for DeviatorScript {
    fn default() -> Self {
        DeviatorScript { lure: ArmId(1), feint: ArmId(2), target: ArmId(0) }
    }
}

impl DeviatorScript {
    pub fn action(&self, t: u64, delay: bool) -> ArmId {
        assert!(t >= 1, "rounds start at 1");
        match (t - 1) % 3 {
            0 => self.lure,
            1 if delay => self.lure,
            1 => self.feint,
            _ => self.target,
        }
    }

    fn arms(&self) -> [ArmId; 3] {
        [self.lure, self.feint, self.target]
    }
}

/// The default deviator script: a2, then a3 (a2 if delayed), then a1.
pub fn deviator_action(t: u64, delay: bool) -> ArmId {
    DeviatorScript::default().action(t, delay)
}

/// How a player chooses its attempted arm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum AgentPolicy {
    /// Highest upper confidence bound in the plausible set.
    CaUcb,
    /// Highest true mean in the plausible set: CA-UCB without statistical
    /// mistakes.
    OracleRank,
    /// Follows a [`DeviatorScript`], ignoring the plausible set.
    ScriptedDeviator(DeviatorScript),
    /// Always attempts the same arm.
    FixedAction { arm: ArmId },
}

impl fmt::Display for AgentPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentPolicy::CaUcb => write!(f, "ca_ucb"),
            AgentPolicy::OracleRank => write!(f, "oracle_rank"),
            AgentPolicy::ScriptedDeviator(_) => write!(f, "deviator"),
            AgentPolicy::FixedAction { arm } => write!(f, "fixed:{}", arm.0),
        }
    }
}

impl FromStr for AgentPolicy {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ca_ucb" | "ca-ucb" => Ok(AgentPolicy::CaUcb),
            "oracle_rank" | "oracle" => Ok(AgentPolicy::OracleRank),
            "deviator" => Ok(AgentPolicy::ScriptedDeviator(DeviatorScript::default())),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|a| a.parse().ok())
                .map(|a| AgentPolicy::FixedAction { arm: ArmId(a) })
                .ok_or_else(|| EngineError::UnknownPolicy(s.to_string())),
        }
    }
}

/// Everything a policy may look at when choosing an arm.
#[derive(Clone, Copy, Debug)]
pub struct DecisionContext<'a> {
    pub plausible: &'a [ArmId],
    pub delay: bool,
    pub prev_attempt: Option<ArmId>,
    pub t: u64,
    pub state: &'a PlayerBanditState,
    /// The player's own true means; only [`AgentPolicy::OracleRank`] reads them.
    pub true_means: &'a [f64],
    pub tie_break: TieBreak,
}

fn argmax(arms: &[ArmId], score: impl Fn(ArmId) -> f64, tie_break: TieBreak) -> ArmId {
    let mut best: Option<(ArmId, f64)> = None;
    for &a in arms {
        let s = score(a);
        let take = match best {
            None => true,
            Some((_, b)) => match tie_break {
                TieBreak::LowestIndex => s > b,
                TieBreak::HighestIndex => s >= b,
            },
        };
        if take {
            best = Some((a, s));
        }
    }
    best.expect("plausible set is never empty when N <= L").0
}

/// Chooses the attempted arm of one player for one round.
pub fn decide(policy: &AgentPolicy, ctx: &DecisionContext<'_>) -> ArmId {
    match *policy {
        AgentPolicy::ScriptedDeviator(script) => script.action(ctx.t, ctx.delay),
        AgentPolicy::FixedAction { arm } => arm,
        _ if ctx.delay => ctx.prev_attempt.expect("delays are only drawn from round 2 on"),
        AgentPolicy::CaUcb => argmax(ctx.plausible, |a| ctx.state.ucb_value(a, ctx.t), ctx.tie_break),
        AgentPolicy::OracleRank => argmax(ctx.plausible, |a| ctx.true_means[a.0], ctx.tie_break),
    }
}

/// Arms `player` could have won last round: those pulled by nobody, by the
/// player itself, or by someone the arm ranks below the player. With no
/// previous round every arm is plausible.
pub fn plausible_set(market: &Market, player: PlayerId, prev_pulls: Option<&[Option<ArmId>]>) -> Vec<ArmId> {
    let mut ok = vec![true; market.n_arms()];
    if let Some(pulls) = prev_pulls {
        for (k, pull) in pulls.iter().enumerate() {
            if let Some(arm) = pull {
                let k = PlayerId(k);
                if k != player && market.arm_prefers(*arm, k, player) {
                    ok[arm.0] = false;
                }
            }
        }
    }
    market.arms().filter(|a| ok[a.0]).collect()
}

/// Successful pulls for an attempt profile: each contested arm goes to the
/// attempter it ranks highest, the others get nothing.
pub fn resolve_conflicts(market: &Market, attempts: &AttemptProfile) -> Vec<Option<ArmId>> {
    attempts.induced_matching(market).assignment().to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub attempts: AttemptProfile,
    /// `None` for players that lost a conflict.
    pub pulls: Vec<Option<ArmId>>,
    pub delays: Vec<bool>,
    /// Observed reward, 0 for unmatched players.
    pub rewards: Vec<f64>,
}

impl RoundRecord {
    /// Number of arms attempted by two or more players.
    pub fn conflicts(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for a in self.attempts.attempts() {
            *counts.entry(*a).or_insert(0usize) += 1;
        }
        counts.values().filter(|&&c| c > 1).count()
    }

    pub fn lost_conflict(&self, player: PlayerId) -> bool {
        self.pulls[player.0].is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub market: Market,
    pub config: SimulationConfig,
    pub policies: Vec<AgentPolicy>,
    pub rounds: Vec<RoundRecord>,
    pub final_states: Vec<PlayerBanditState>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }
}

/// A running simulation that can be stepped round by round.
pub struct Simulation<'m> {
    market: &'m Market,
    policies: Vec<AgentPolicy>,
    config: SimulationConfig,
    reward: RewardModel,
    states: Vec<PlayerBanditState>,
    player_rngs: Vec<SimRng>,
    env_rng: SimRng,
    prev: Option<RoundRecord>,
}

impl<'m> Simulation<'m> {
    pub fn new(market: &'m Market, policies: Vec<AgentPolicy>, config: SimulationConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let n = market.n_players();
        if policies.len() != n {
            return Err(EngineError::PolicyCount { expected: n, found: policies.len() });
        }
        let out_of_range = |arm: ArmId| EngineError::ArmOutOfRange { arm: arm.0, n_arms: market.n_arms() };
        for p in &policies {
            let arms: &[ArmId] = match p {
                AgentPolicy::FixedAction { arm } => std::slice::from_ref(arm),
                AgentPolicy::ScriptedDeviator(s) => &s.arms(),
                _ => &[],
            };
            if let Some(&bad) = arms.iter().find(|a| a.0 >= market.n_arms()) {
                return Err(out_of_range(bad));
            }
        }
        if let Some(init) = &config.initial_attempts {
            if init.len() != n {
                return Err(EngineError::InitialAttemptCount { expected: n, found: init.len() });
            }
            if let Some(&bad) = init.iter().find(|a| a.0 >= market.n_arms()) {
                return Err(out_of_range(bad));
            }
        }
        Ok(Simulation {
            market,
            reward: RewardModel::new(config.noise_sigma),
            states: vec![PlayerBanditState::new(market.n_arms()); n],
            player_rngs: (0..n).map(|p| rng::player_stream(config.seed, p)).collect(),
            env_rng: rng::environment_stream(config.seed),
            policies,
            config,
            prev: None,
        })
    }

    pub fn market(&self) -> &Market {
        self.market
    }

    pub fn states(&self) -> &[PlayerBanditState] {
        &self.states
    }

    pub fn last_round(&self) -> Option<&RoundRecord> {
        self.prev.as_ref()
    }

    /// Index of the next round to be played.
    pub fn next_round(&self) -> u64 {
        self.prev.as_ref().map_or(1, |r| r.t + 1)
    }

    /// Pretends `record` was the last round played, so the next [`step`]
    /// continues from its attempts and pulls. Bandit statistics are kept.
    ///
    /// [`step`]: Simulation::step
    pub fn resume_from(&mut self, record: RoundRecord) {
        assert_eq!(record.attempts.len(), self.market.n_players());
        self.prev = Some(record);
    }

    fn first_attempts(&mut self) -> Vec<ArmId> {
        let n_arms = self.market.n_arms();
        // one draw per player regardless of policy keeps the stream aligned
        let drawn: Vec<ArmId> = (0..self.market.n_players())
            .map(|_| ArmId(self.env_rng.random_range(0..n_arms)))
            .collect();
        if let Some(init) = &self.config.initial_attempts {
            return init.clone();
        }
        self.policies
            .iter()
            .zip(drawn)
            .map(|(policy, arm)| match policy {
                AgentPolicy::ScriptedDeviator(s) => s.action(1, false),
                AgentPolicy::FixedAction { arm } => *arm,
                _ => arm,
            })
            .collect()
    }

    /// Plays one round and returns its record.
    pub fn step(&mut self) -> &RoundRecord {
        let t = self.next_round();
        let n = self.market.n_players();
        let (attempts, delays) = match &self.prev {
            None => (self.first_attempts(), vec![false; n]),
            Some(prev) => {
                let mut attempts = Vec::with_capacity(n);
                let mut delays = Vec::with_capacity(n);
                for p in self.market.players() {
                    let delay = self.player_rngs[p.0].random_bool(self.config.lambda);
                    let plausible = plausible_set(self.market, p, Some(&prev.pulls));
                    assert!(!plausible.is_empty(), "empty plausible set for {p} at round {t}");
                    let ctx = DecisionContext {
                        plausible: &plausible,
                        delay,
                        prev_attempt: Some(prev.attempts.get(p)),
                        t,
                        state: &self.states[p.0],
                        true_means: self.market.mean_row(p),
                        tie_break: self.config.tie_break,
                    };
                    attempts.push(decide(&self.policies[p.0], &ctx));
                    delays.push(delay);
                }
                (attempts, delays)
            }
        };
        let attempts = AttemptProfile::new(attempts);
        let pulls = resolve_conflicts(self.market, &attempts);
        let mut rewards = vec![0.0; n];
        for p in self.market.players() {
            if let Some(arm) = pulls[p.0] {
                let r = self.reward.sample_reward(self.market.mean(p, arm), &mut self.env_rng);
                self.states[p.0].record_success(arm, r);
                rewards[p.0] = r;
            }
        }
        self.prev = Some(RoundRecord { t, attempts, pulls, delays, rewards });
        self.prev.as_ref().expect("just set")
    }

    pub fn into_final_states(self) -> Vec<PlayerBanditState> {
        self.states
    }
}

/// Runs a full simulation of `config.horizon` rounds.
pub fn run(market: &Market, policies: &[AgentPolicy], config: &SimulationConfig) -> Result<Trace, EngineError> {
    let mut sim = Simulation::new(market, policies.to_vec(), config.clone())?;
    let mut rounds = Vec::with_capacity(config.horizon as usize);
    for _ in 0..config.horizon {
        rounds.push(sim.step().clone());
    }
    Ok(Trace {
        market: market.clone(),
        config: config.clone(),
        policies: policies.to_vec(),
        rounds,
        final_states: sim.into_final_states(),
    })
}
