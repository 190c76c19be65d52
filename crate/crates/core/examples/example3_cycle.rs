//! Three players who know their true preferences still cycle forever when
//! nobody ever waits. Random delays break the cycle.

use caucb::engine::{run, AgentPolicy, SimulationConfig};
use caucb::market::examples;
use caucb::metrics::instability;

fn main() {
    let market = examples::three_player_cycle();
    let policies = [AgentPolicy::OracleRank; 3];

    let cfg = SimulationConfig::new(0.0, 9, 0).with_initial_attempts(&[1, 0, 1]);
    for r in &run(&market, &policies, &cfg).unwrap().rounds {
        let names: Vec<String> = r.attempts.attempts().iter().map(ToString::to_string).collect();
        println!("t={}  {}  conflicts={}", r.t, names.join(" "), r.conflicts());
    }

    for lambda in [0.0, 0.1, 0.5] {
        let cfg = SimulationConfig::new(lambda, 1000, 7).with_initial_attempts(&[1, 0, 1]);
        let trace = run(&market, &policies, &cfg).unwrap();
        println!("lambda={lambda}: {} unstable rounds out of 1000", instability(&trace).unstable_rounds());
    }
}
