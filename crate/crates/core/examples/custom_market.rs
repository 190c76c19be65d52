//! Load a market from JSON, simulate it and write the per-round CSV.
//!
//! ```text
//! cargo run -p caucb --example custom_market -- crates/core/examples/data/market.json out.csv
//! ```

use std::path::PathBuf;

use caucb::cli::{self, RunArgs};
use caucb::AgentPolicy;

fn main() {
    let mut args = std::env::args().skip(1);
    let market = args
        .next()
        .map_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/market.json")), PathBuf::from);
    let out = args.next().map_or_else(|| std::env::temp_dir().join("custom_market.csv"), PathBuf::from);

    let report = cli::cmd_stable(&market).unwrap();
    println!("stable set: {}", report["stable_matchings"]);

    let outputs = cli::cmd_run(&RunArgs {
        market_file: market,
        lambda: 0.1,
        horizon: 2000,
        sigma: 1.0,
        seed: 42,
        default_policy: AgentPolicy::CaUcb,
        policies: Vec::new(),
        initial_attempts: None,
        out,
    })
    .unwrap();
    println!("wrote {} and {}", outputs.csv.display(), outputs.sidecar.display());
}
