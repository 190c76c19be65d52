//! The `caucb` binary and the command functions behind it.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use caucb::cli::{self, ExperimentSource, RunArgs};
use caucb::experiments::CSV_HEADER;
use caucb::market::{examples, Market};
use caucb::AgentPolicy;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_caucb"))
}

fn market_file(dir: &Path, name: &str, market: &Market) -> PathBuf {
    let path = dir.join(name);
    cli::write_market(market, &path).unwrap();
    path
}

fn run_args(market: PathBuf, out: PathBuf) -> RunArgs {
    RunArgs {
        market_file: market,
        lambda: 0.1,
        horizon: 50,
        sigma: 1.0,
        seed: 5,
        default_policy: AgentPolicy::CaUcb,
        policies: Vec::new(),
        initial_attempts: None,
        out,
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn n_matchings(report: &Value) -> usize {
    report["stable_matchings"].as_array().unwrap().len()
}

#[test]
fn horizon_one_writes_one_row_per_player() {
    let dir = TempDir::new().unwrap();
    let m = market_file(dir.path(), "m.json", &examples::three_player_cycle());
    let mut args = run_args(m, dir.path().join("out.csv"));
    args.horizon = 1;
    let out = cli::cmd_run(&args).unwrap();
    let text = fs::read_to_string(&out.csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 3);
}

#[test]
fn deviator_market_sidecar_lists_one_matching() {
    let dir = TempDir::new().unwrap();
    let m = market_file(dir.path(), "dev.json", &examples::deviator_market(examples::DEVIATOR_P3_MEANS));
    let mut args = run_args(m, dir.path().join("dev.csv"));
    args.policies = vec![(2, "deviator".parse().unwrap())];
    let out = cli::cmd_run(&args).unwrap();
    let side = read_json(&out.sidecar);
    assert_eq!(n_matchings(&side["stable"]), 1);
    assert_eq!(side["stable"]["optimal_match"], side["stable"]["pessimal_match"]);
    assert_eq!(side["policies"][2], "deviator");
    assert_eq!(side["final_regret_pessimal"].as_array().unwrap().len(), 3);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let m = market_file(dir.path(), "m.json", &examples::three_player_cycle());
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = ["a", "b"]
        .iter()
        .map(|tag| {
            let status = bin()
                .arg("run")
                .arg(&m)
                .args(["--seed", "9", "--horizon", "200", "--lambda", "0.2", "--out"])
                .arg(dir.path().join(format!("{tag}.csv")))
                .status()
                .unwrap();
            assert!(status.success());
            let csv = fs::read(dir.path().join(format!("{tag}.csv"))).unwrap();
            let mut side = read_json(&dir.path().join(format!("{tag}.sidecar.json")));
            side["market_file"] = Value::Null;
            (csv, serde_json::to_vec(&side).unwrap())
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn csv_columns_are_consistent() {
    let dir = TempDir::new().unwrap();
    let m = market_file(dir.path(), "m.json", &examples::three_player_cycle());
    let args = run_args(m, dir.path().join("t.csv"));
    cli::cmd_run(&args).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("t.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 50 * 3);
    for round in rows.chunks(3) {
        let unstable: Vec<&str> = round.iter().map(|r| &r[12]).collect();
        assert!(unstable.iter().all(|u| *u == unstable[0] && (*u == "0" || *u == "1")));
        for r in round {
            let pull: i64 = r[7].parse().unwrap();
            let reward: f64 = r[9].parse().unwrap();
            if pull == -1 {
                assert_eq!(reward, 0.0);
            } else {
                assert_eq!(pull, r[6].parse::<i64>().unwrap());
            }
        }
    }
}

#[test]
fn stable_command_counts() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (examples::two_player(), 1),
        (examples::three_player_cycle(), 2),
        (examples::deviator_market(examples::DEVIATOR_P3_MEANS), 1),
    ];
    for (i, (market, count)) in cases.iter().enumerate() {
        let path = market_file(dir.path(), &format!("{i}.json"), market);
        let report = cli::cmd_stable(&path).unwrap();
        assert_eq!(n_matchings(&report), *count);
    }
    let report = cli::cmd_stable(&dir.path().join("0.json")).unwrap();
    assert_eq!(report["stable_matchings"][0], serde_json::json!([[0, 0], [1, 1]]));

    let out = bin().arg("stable").arg(dir.path().join("1.json")).output().unwrap();
    assert!(out.status.success());
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(n_matchings(&printed), 2);
}

#[test]
fn stable_command_falls_back_beyond_enumeration_limit() {
    let dir = TempDir::new().unwrap();
    let mut r = caucb::rng::stream(3, 0);
    let big = caucb::market::gen_uniform(9, 9, &mut r).unwrap();
    let report = cli::cmd_stable(&market_file(dir.path(), "big.json", &big)).unwrap();
    assert_eq!(report["enumerated"], false);
    assert!(report["note"].is_string());
    assert_eq!(report["optimal_match"].as_array().unwrap().len(), 9);
}

#[test]
fn exit_codes_and_cleanup() {
    let dir = TempDir::new().unwrap();
    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    let invalid = dir.path().join("invalid.json");
    fs::write(&invalid, r#"{"n_players":2,"n_arms":2,"mean_rewards":[[1,1],[2,1]],"arm_prefs":[[0,1],[1,0]]}"#).unwrap();
    let good = market_file(dir.path(), "good.json", &examples::two_player());
    let out = dir.path().join("o.csv");

    let code = |args: &[&std::ffi::OsStr]| bin().args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["run".as_ref(), garbage.as_os_str(), "--out".as_ref(), out.as_os_str()]), 2);
    assert_eq!(code(&["run".as_ref(), invalid.as_os_str(), "--out".as_ref(), out.as_os_str()]), 3);
    assert_eq!(
        code(&["run".as_ref(), good.as_os_str(), "--lambda".as_ref(), "1.5".as_ref(), "--out".as_ref(), out.as_os_str()]),
        3
    );
    assert_eq!(code(&["run".as_ref(), dir.path().join("missing.json").as_os_str(), "--out".as_ref(), out.as_os_str()]), 4);
    assert_eq!(code(&["experiment".as_ref(), "--preset".as_ref(), "nope".as_ref(), "--out-dir".as_ref(), dir.path().as_os_str()]), 2);
    assert!(!out.exists());

    // the CSV is written, then the sidecar cannot be created: both must vanish
    let blocked = dir.path().join("blocked.csv");
    fs::create_dir(cli::sidecar_path(&blocked)).unwrap();
    let err = cli::cmd_run(&run_args(good.clone(), blocked.clone())).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(!blocked.exists());
}

#[test]
fn experiment_from_spec_file_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let mut spec = caucb::experiments::preset("hetero_sweep").unwrap();
    spec.name = "tiny".into();
    for cell in &mut spec.cells {
        cell.replications = 2;
        cell.config.horizon = 30;
    }
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let manifest_path = cli::cmd_experiment(&ExperimentSource::SpecFile(spec_path), dir.path()).unwrap();
    let manifest = read_json(&manifest_path);
    let cells = manifest["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 5);
    for cell in cells {
        let file = dir.path().join(cell["files"][0].as_str().unwrap());
        let rows = fs::read_to_string(file).unwrap().lines().count();
        assert_eq!(rows, 1 + 2 * 30 * 10);
        assert!(cell["params"]["beta"].is_number());
    }
}

#[test]
fn preset_cell_counts() {
    for (name, cells) in [("size_sweep", 4), ("hetero_sweep", 5), ("example3", 1)] {
        let spec = cli::load_spec(&ExperimentSource::Preset(name.into())).unwrap();
        assert_eq!(spec.cells.len(), cells, "{name}");
    }
}

#[test]
fn repro_runs_small_presets_into_subdirectories() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["repro", "--preset", "example1", "--preset", "example3", "--out-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = read_json(&dir.path().join("example3").join("example3_manifest.json"));
    assert_eq!(manifest["cells"][0]["horizon"], 100);
    assert!(dir.path().join("example1").join("example1_manifest.json").exists());
}
