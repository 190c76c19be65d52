//! Named experiment presets and seeded replication.
//!
//! An experiment is a list of cells (one per swept parameter value); each cell
//! runs a number of independent replications. Replication `r` of cell `c` in
//! experiment `e` is seeded with `derive_seed(seed_base, [e, c, r])`, and
//! random markets with a separate derived seed, so distinct experiments never
//! share streams and identical specs give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::engine::{self, AgentPolicy, DeviatorScript, EngineError, SimulationConfig, Trace};
use crate::market::{self, examples, ArmId, Market, MarketError};
use crate::metrics::{self, RegretSeries, StabilitySeries};
use crate::rng;
use crate::stable_matching::{enumerate_stable, extreme_matches, MAX_ENUMERATION_ARMS};

pub const PRESETS: [&str; 5] = ["size_sweep", "hetero_sweep", "example1", "example3", "deviator"];

/// Market sizes of the size sweep.
pub const SIZE_GRID: [usize; 4] = [5, 10, 15, 20];

/// Preference-correlation values of the heterogeneity sweep.
pub const BETA_GRID: [f64; 5] = [0.0, 1.0, 2.0, 5.0, 10.0];

pub const DEFAULT_SEED_BASE: u64 = 1;

/// Exact header of the per-round CSV output.
pub const CSV_HEADER: &str = "experiment,cell,replication,seed,t,player,attempt,pull,delay,reward,regret_pessimal_cum,regret_optimal_cum,unstable,conflicts_round";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown preset {0:?} (known: size_sweep, hetero_sweep, example1, example3, deviator)")]
    UnknownPreset(String),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("experiment has no cells")]
    NoCells,
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketSource {
    Uniform { n_players: usize, n_arms: usize },
    Correlated { n_players: usize, n_arms: usize, beta: f64 },
    GloballyRanked { n_players: usize, n_arms: usize },
    Explicit { market: Market },
}

impl MarketSource {
    pub fn build(&self, seed: u64) -> Result<Market, MarketError> {
        let mut r = rng::stream(seed, 0);
        match self {
            MarketSource::Uniform { n_players, n_arms } => market::gen_uniform(*n_players, *n_arms, &mut r),
            MarketSource::Correlated { n_players, n_arms, beta } => {
                market::gen_correlated(*n_players, *n_arms, *beta, &mut r)
            }
            MarketSource::GloballyRanked { n_players, n_arms } => {
                market::gen_globally_ranked(*n_players, *n_arms, &mut r)
            }
            MarketSource::Explicit { market } => Ok(market.clone()),
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self, MarketSource::Explicit { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyAssignment {
    All(AgentPolicy),
    PerPlayer(Vec<AgentPolicy>),
}

impl PolicyAssignment {
    pub fn for_players(&self, n: usize) -> Vec<AgentPolicy> {
        match self {
            PolicyAssignment::All(p) => vec![*p; n],
            PolicyAssignment::PerPlayer(v) => v.clone(),
        }
    }
}

/// One parameter setting of an experiment. The config's `seed` is replaced
/// by the derived per-replication seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub label: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub market: MarketSource,
    pub policies: PolicyAssignment,
    pub config: SimulationConfig,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    pub cells: Vec<CellSpec>,
}

fn default_seed_base() -> u64 {
    DEFAULT_SEED_BASE
}

impl ExperimentSpec {
    pub fn replication_seed(&self, cell: &CellSpec, replication: usize) -> u64 {
        rng::derive_seed(self.seed_base, &[&self.name, &cell.label, &replication.to_string()])
    }

    pub fn market_seed(&self, cell: &CellSpec, replication: usize) -> u64 {
        rng::derive_seed(self.seed_base, &[&self.name, &cell.label, &replication.to_string(), "market"])
    }
}

fn params(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn sweep_config(horizon: u64) -> SimulationConfig {
    SimulationConfig::new(0.1, horizon, 0)
}

/// Looks up a named preset.
pub fn preset(name: &str) -> Result<ExperimentSpec, ExperimentError> {
    let cells = match name {
        "size_sweep" => SIZE_GRID
            .iter()
            .map(|&n| CellSpec {
                label: format!("N={n}"),
                params: params(&[("n", n.into())]),
                market: MarketSource::Uniform { n_players: n, n_arms: n },
                policies: PolicyAssignment::All(AgentPolicy::CaUcb),
                config: sweep_config(5000),
                replications: 10,
            })
            .collect(),
        "hetero_sweep" => BETA_GRID
            .iter()
            .map(|&beta| CellSpec {
                label: format!("beta={beta}"),
                params: params(&[("beta", beta.into())]),
                market: MarketSource::Correlated { n_players: 10, n_arms: 10, beta },
                policies: PolicyAssignment::All(AgentPolicy::CaUcb),
                config: sweep_config(5000),
                replications: 10,
            })
            .collect(),
        "example1" => vec![CellSpec {
            label: "example1".into(),
            params: BTreeMap::new(),
            market: MarketSource::Explicit { market: examples::two_player() },
            policies: PolicyAssignment::All(AgentPolicy::CaUcb),
            config: SimulationConfig::new(0.0, 100, 0).with_initial_attempts(&[0, 0]),
            replications: 1,
        }],
        "example3" => vec![CellSpec {
            label: "example3".into(),
            params: BTreeMap::new(),
            market: MarketSource::Explicit { market: examples::three_player_cycle() },
            policies: PolicyAssignment::All(AgentPolicy::OracleRank),
            config: SimulationConfig::new(0.0, 100, 0).with_initial_attempts(&[1, 0, 1]),
            replications: 1,
        }],
        "deviator" => vec![CellSpec {
            label: "deviator".into(),
            params: params(&[(
                "p3_means",
                Value::from(examples::DEVIATOR_P3_MEANS.to_vec()),
            )]),
            market: MarketSource::Explicit { market: examples::deviator_market(examples::DEVIATOR_P3_MEANS) },
            policies: PolicyAssignment::PerPlayer(vec![
                AgentPolicy::CaUcb,
                AgentPolicy::CaUcb,
                AgentPolicy::ScriptedDeviator(DeviatorScript::default()),
            ]),
            config: SimulationConfig::new(0.1, 9999, 0),
            replications: 10,
        }],
        other => return Err(ExperimentError::UnknownPreset(other.to_string())),
    };
    Ok(ExperimentSpec { name: name.to_string(), seed_base: DEFAULT_SEED_BASE, cells })
}

/// One simulation run with all derived metrics.
#[derive(Clone, Debug)]
pub struct ReplicationResult {
    pub replication: usize,
    pub seed: u64,
    pub trace: Trace,
    pub optimal_match: Vec<ArmId>,
    pub pessimal_match: Vec<ArmId>,
    /// Number of stable matchings, when the market was small enough to enumerate.
    pub n_stable: Option<usize>,
    pub regret_pessimal: RegretSeries,
    pub regret_optimal: RegretSeries,
    pub regret_realized: RegretSeries,
    pub stability: StabilitySeries,
}

impl ReplicationResult {
    pub fn market(&self) -> &Market {
        &self.trace.market
    }
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub label: String,
    pub params: BTreeMap<String, Value>,
    pub replications: Vec<ReplicationResult>,
}

/// Simulates one market and computes every metric for it.
pub fn run_replication(
    market: &Market,
    policies: &[AgentPolicy],
    config: &SimulationConfig,
    replication: usize,
) -> Result<ReplicationResult, ExperimentError> {
    let trace = engine::run(market, policies, config)?;
    let n_stable = (market.n_arms() <= MAX_ENUMERATION_ARMS)
        .then(|| enumerate_stable(market).map(|s| s.matchings.len()).ok())
        .flatten();
    let (optimal_match, pessimal_match) = extreme_matches(market);
    Ok(ReplicationResult {
        replication,
        seed: config.seed,
        regret_pessimal: metrics::pessimal_regret(&trace, &pessimal_match),
        regret_optimal: metrics::optimal_regret(&trace, &optimal_match),
        regret_realized: metrics::realized_regret(&trace, &pessimal_match),
        stability: metrics::instability(&trace),
        optimal_match,
        pessimal_match,
        n_stable,
        trace,
    })
}

/// Runs every replication of one cell; replications execute in parallel and
/// are returned in replication order.
pub fn run_cell(spec: &ExperimentSpec, cell: &CellSpec) -> Result<CellResult, ExperimentError> {
    let replications = (0..cell.replications)
        .into_par_iter()
        .map(|r| {
            let market = cell.market.build(spec.market_seed(cell, r))?;
            let policies = cell.policies.for_players(market.n_players());
            let config = SimulationConfig { seed: spec.replication_seed(cell, r), ..cell.config.clone() };
            run_replication(&market, &policies, &config, r)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CellResult { label: cell.label.clone(), params: cell.params.clone(), replications })
}

/// Runs all cells in order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    if spec.cells.is_empty() {
        return Err(ExperimentError::NoCells);
    }
    spec.cells.iter().map(|c| run_cell(spec, c)).collect()
}

impl CellResult {
    /// Per replication, the round-by-round maximum pessimal regret over players.
    pub fn max_player_regret(&self) -> Vec<Vec<f64>> {
        self.replications.iter().map(|r| r.regret_pessimal.max_over_players()).collect()
    }

    /// Mean over replications of the final maximum player regret.
    pub fn mean_final_max_regret(&self) -> f64 {
        let v = self.max_player_regret();
        v.iter().map(|s| *s.last().expect("non-empty horizon")).sum::<f64>() / v.len() as f64
    }

    /// Mean over replications of the fraction of unstable rounds in `from..=to`.
    pub fn mean_instability(&self, from: usize, to: usize) -> f64 {
        let width = (to - from + 1) as f64;
        self.replications
            .iter()
            .map(|r| r.stability.unstable_between(from, to) as f64 / width)
            .sum::<f64>()
            / self.replications.len() as f64
    }

    /// Mean over replications of the cumulative unstable-round count at `t`.
    pub fn mean_cumulative_unstable(&self, t: usize) -> f64 {
        self.replications
            .iter()
            .map(|r| r.stability.cumulative[t - 1] as f64)
            .sum::<f64>()
            / self.replications.len() as f64
    }

    /// Writes the long-format rows of every replication (no header).
    pub fn write_rows<W: Write>(&self, experiment: &str, out: &mut csv::Writer<W>) -> Result<(), ExperimentError> {
        for rep in &self.replications {
            write_trace_rows(experiment, &self.label, rep, out)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    experiment: &'a str,
    cell: &'a str,
    replication: usize,
    seed: u64,
    t: u64,
    player: usize,
    attempt: usize,
    pull: i64,
    delay: u8,
    reward: f64,
    regret_pessimal_cum: f64,
    regret_optimal_cum: f64,
    unstable: u8,
    conflicts_round: usize,
}

/// One row per player per round in the [`CSV_HEADER`] layout.
pub fn write_trace_rows<W: Write>(
    experiment: &str,
    cell: &str,
    rep: &ReplicationResult,
    out: &mut csv::Writer<W>,
) -> Result<(), ExperimentError> {
    for (i, round) in rep.trace.rounds.iter().enumerate() {
        let conflicts = round.conflicts();
        for p in 0..round.pulls.len() {
            out.serialize(CsvRow {
                experiment,
                cell,
                replication: rep.replication,
                seed: rep.seed,
                t: round.t,
                player: p,
                attempt: round.attempts.attempts()[p].0,
                pull: round.pulls[p].map_or(-1, |a| a.0 as i64),
                delay: u8::from(round.delays[p]),
                reward: round.rewards[p],
                regret_pessimal_cum: rep.regret_pessimal.per_player[p][i],
                regret_optimal_cum: rep.regret_optimal.per_player[p][i],
                unstable: rep.stability.indicator[i],
                conflicts_round: conflicts,
            })?;
        }
    }
    Ok(())
}

/// A csv writer that emits [`CSV_HEADER`] first and rows without automatic
/// headers.
pub fn csv_writer<W: Write>(inner: W) -> Result<csv::Writer<W>, ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(inner);
    w.write_record(CSV_HEADER.split(','))?;
    Ok(w)
}
