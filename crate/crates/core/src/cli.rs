//! Command implementations behind the `caucb` binary.
//!
//! Exit codes: 0 on success, 2 for unparsable input, 3 for inputs that parse
//! but violate an invariant, 4 for I/O failures. Files written by a failing
//! command are removed before the error is returned.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{AgentPolicy, EngineError, SimulationConfig};
use crate::experiments::{self, csv_writer, ExperimentError, ExperimentSpec};
use crate::market::{ArmId, LoadError, Market, MarketData};
use crate::stable_matching::{deferred_acceptance, enumerate_stable, ProposingSide, MAX_ENUMERATION_ARMS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Invalid(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn experiment_error(e: ExperimentError, path: &Path) -> CliError {
    match e {
        ExperimentError::UnknownPreset(_) => CliError::Parse(e.to_string()),
        ExperimentError::Csv(err) => match err.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Invalid(format!("{other:?}")),
        },
        other => CliError::Invalid(other.to_string()),
    }
}

/// Removes every registered file on drop unless [`OutputGuard::commit`] ran.
#[derive(Default)]
struct OutputGuard {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn create(&mut self, path: &Path) -> Result<fs::File, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        self.paths.push(path.to_path_buf());
        Ok(f)
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<(), CliError> {
        use std::io::Write;
        let mut f = self.create(path)?;
        f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.paths)
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.paths {
                let _ = fs::remove_file(p);
            }
        }
    }
}

pub fn load_market(path: &Path) -> Result<Market, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Market::from_json(&text).map_err(|e| match e {
        LoadError::Parse(e) => CliError::Parse(format!("{}: {e}", path.display())),
        LoadError::Market(e) => CliError::Invalid(format!("{}: {e}", path.display())),
    })
}

/// Parses `PLAYER=POLICY`, e.g. `2=deviator`.
pub fn parse_policy_override(s: &str) -> Result<(usize, AgentPolicy), CliError> {
    let (player, policy) = s
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("expected PLAYER=POLICY, got {s:?}")))?;
    let player = player
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("bad player index in {s:?}")))?;
    let policy = policy.trim().parse().map_err(|e: EngineError| CliError::Parse(e.to_string()))?;
    Ok((player, policy))
}

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub market_file: PathBuf,
    pub lambda: f64,
    pub horizon: u64,
    pub sigma: f64,
    pub seed: u64,
    pub default_policy: AgentPolicy,
    pub policies: Vec<(usize, AgentPolicy)>,
    pub initial_attempts: Option<Vec<usize>>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutputs {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

/// Where the JSON sidecar of a trace CSV goes: `trace.csv` → `trace.sidecar.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("sidecar.json")
}

#[derive(Serialize)]
struct StableReport {
    n_players: usize,
    n_arms: usize,
    enumerated: bool,
    stable_matchings: Option<Vec<Vec<(usize, usize)>>>,
    optimal_match: Vec<usize>,
    pessimal_match: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn indices(arms: &[ArmId]) -> Vec<usize> {
    arms.iter().map(|a| a.0).collect()
}

fn stable_report(market: &Market) -> StableReport {
    match enumerate_stable(market) {
        Ok(set) => StableReport {
            n_players: market.n_players(),
            n_arms: market.n_arms(),
            enumerated: true,
            stable_matchings: Some(set.matchings.iter().map(|m| m.pairs()).collect()),
            optimal_match: indices(&set.optimal_match),
            pessimal_match: indices(&set.pessimal_match),
            note: None,
        },
        Err(_) => {
            let total = |side| {
                deferred_acceptance(market, side)
                    .as_total()
                    .expect("deferred acceptance matches every player")
            };
            StableReport {
                n_players: market.n_players(),
                n_arms: market.n_arms(),
                enumerated: false,
                stable_matchings: None,
                optimal_match: indices(&total(ProposingSide::Players)),
                pessimal_match: indices(&total(ProposingSide::Arms)),
                note: Some(format!(
                    "more than {MAX_ENUMERATION_ARMS} arms: stable set not enumerated, extremes from deferred acceptance"
                )),
            }
        }
    }
}

/// Stable matchings and optimal/pessimal partners of a market file, as JSON.
pub fn cmd_stable(market_file: &Path) -> Result<Value, CliError> {
    let market = load_market(market_file)?;
    Ok(serde_json::to_value(stable_report(&market)).expect("report serializes"))
}

/// Simulates a market file and writes the trace CSV plus its JSON sidecar.
pub fn cmd_run(args: &RunArgs) -> Result<RunOutputs, CliError> {
    let market = load_market(&args.market_file)?;
    let mut policies = vec![args.default_policy; market.n_players()];
    for &(player, policy) in &args.policies {
        let slot = policies.get_mut(player).ok_or_else(|| {
            CliError::Invalid(format!("policy for player {player}, market has {}", market.n_players()))
        })?;
        *slot = policy;
    }
    let mut config = SimulationConfig::new(args.lambda, args.horizon, args.seed).with_sigma(args.sigma);
    if let Some(init) = &args.initial_attempts {
        config = config.with_initial_attempts(init);
    }
    let rep = experiments::run_replication(&market, &policies, &config, 0)
        .map_err(|e| experiment_error(e, &args.out))?;

    let mut guard = OutputGuard::default();
    let file = guard.create(&args.out)?;
    let mut w = csv_writer(BufWriter::new(file)).map_err(|e| experiment_error(e, &args.out))?;
    experiments::write_trace_rows("run", "0", &rep, &mut w).map_err(|e| experiment_error(e, &args.out))?;
    w.flush().map_err(|e| CliError::io(&args.out, e))?;
    drop(w);

    let report = stable_report(&market);
    let sidecar = json!({
        "market_file": args.market_file.display().to_string(),
        "config": config,
        "policies": policies.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "stable": report,
        "final_regret_pessimal": rep.regret_pessimal.final_values(),
        "final_regret_optimal": rep.regret_optimal.final_values(),
        "final_regret_realized": rep.regret_realized.final_values(),
        "unstable_rounds": rep.stability.unstable_rounds(),
    });
    let sidecar_path = sidecar_path(&args.out);
    guard.write(&sidecar_path, &serde_json::to_string_pretty(&sidecar).expect("json"))?;
    guard.commit();
    Ok(RunOutputs { csv: args.out.clone(), sidecar: sidecar_path })
}

pub enum ExperimentSource {
    Preset(String),
    SpecFile(PathBuf),
}

pub fn load_spec(source: &ExperimentSource) -> Result<ExperimentSpec, CliError> {
    match source {
        ExperimentSource::Preset(name) => {
            experiments::preset(name).map_err(|e| CliError::Parse(e.to_string()))
        }
        ExperimentSource::SpecFile(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let spec: ExperimentSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
            if spec.cells.is_empty() {
                return Err(CliError::Invalid(format!("{}: experiment has no cells", path.display())));
            }
            Ok(spec)
        }
    }
}

fn file_label(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Runs an experiment, writing one CSV per cell and a manifest. Returns the
/// manifest path.
pub fn cmd_experiment(source: &ExperimentSource, out_dir: &Path) -> Result<PathBuf, CliError> {
    let spec = load_spec(source)?;
    let mut guard = OutputGuard::default();
    let mut cells = Vec::new();
    for cell in &spec.cells {
        let result = experiments::run_cell(&spec, cell).map_err(|e| experiment_error(e, out_dir))?;
        let name = format!("{}__{}.csv", file_label(&spec.name), file_label(&cell.label));
        let path = out_dir.join(&name);
        let file = guard.create(&path)?;
        let mut w = csv_writer(BufWriter::new(file)).map_err(|e| experiment_error(e, &path))?;
        result.write_rows(&spec.name, &mut w).map_err(|e| experiment_error(e, &path))?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        let horizon = cell.config.horizon as usize;
        cells.push(json!({
            "label": cell.label,
            "params": cell.params,
            "files": [name],
            "replications": result.replications.len(),
            "horizon": horizon,
            "summary": {
                "final_max_regret_pessimal": result
                    .max_player_regret()
                    .iter()
                    .map(|s| s[horizon - 1])
                    .collect::<Vec<_>>(),
                "mean_final_max_regret_pessimal": result.mean_final_max_regret(),
                "mean_unstable_rounds": result.mean_cumulative_unstable(horizon),
            },
        }));
    }
    let manifest = json!({ "experiment": spec.name, "seed_base": spec.seed_base, "cells": cells });
    let manifest_path = out_dir.join(format!("{}_manifest.json", file_label(&spec.name)));
    guard.write(&manifest_path, &serde_json::to_string_pretty(&manifest).expect("json"))?;
    guard.commit();
    Ok(manifest_path)
}

/// Runs the named presets (all of them when `presets` is empty), each into
/// its own subdirectory of `out_dir`. Returns the manifest paths.
pub fn cmd_repro(presets: &[String], out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let names: Vec<String> = if presets.is_empty() {
        experiments::PRESETS.iter().map(|s| s.to_string()).collect()
    } else {
        presets.to_vec()
    };
    names
        .iter()
        .map(|name| cmd_experiment(&ExperimentSource::Preset(name.clone()), &out_dir.join(name)))
        .collect()
}

/// Writes a market file, for scripting.
pub fn write_market(market: &Market, path: &Path) -> Result<(), CliError> {
    let data: MarketData = market.to_data();
    let mut guard = OutputGuard::default();
    guard.write(path, &data.to_json())?;
    guard.commit();
    Ok(())
}
