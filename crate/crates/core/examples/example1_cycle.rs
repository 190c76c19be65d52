//! Two players, no delays, both starting on a1: they never settle.
//!
//! ```text
//! cargo run -p caucb --example example1_cycle
//! ```

use caucb::engine::{run, AgentPolicy, SimulationConfig};
use caucb::market::examples;

fn main() {
    let market = examples::two_player();
    let cfg = SimulationConfig::new(0.0, 12, 0).with_initial_attempts(&[0, 0]);
    let trace = run(&market, &[AgentPolicy::CaUcb; 2], &cfg).unwrap();
    for r in &trace.rounds {
        let attempts: Vec<String> = r.attempts.attempts().iter().map(ToString::to_string).collect();
        let pulls: Vec<String> = r.pulls.iter().map(|p| p.map_or("-".into(), |a| a.to_string())).collect();
        println!("t={:>2}  attempts {:?}  pulls {:?}", r.t, attempts, pulls);
    }

    // a little randomness is enough to escape
    let cfg = SimulationConfig::new(0.2, 200, 0).with_initial_attempts(&[0, 0]);
    let trace = run(&market, &[AgentPolicy::CaUcb; 2], &cfg).unwrap();
    let last = &trace.rounds.last().unwrap().attempts;
    let names: Vec<String> = last.attempts().iter().map(ToString::to_string).collect();
    println!("with lambda=0.2, round 200 attempts: {}", names.join(" "));
}
