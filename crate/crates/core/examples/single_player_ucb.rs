//! One player alone is plain UCB. Counts how often a worse arm was pulled
//! while its index beat a better one.

use caucb::engine::{run, AgentPolicy, SimulationConfig};
use caucb::market::Market;
use caucb::metrics::{event_counters, realized_regret};
use caucb::ArmId;

fn main() {
    let market = Market::new(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]], vec![vec![0]; 5]).unwrap();
    let horizon = 5000;
    let trace = run(&market, &[AgentPolicy::CaUcb], &SimulationConfig::new(0.0, horizon, 1)).unwrap();
    let states = &trace.final_states[0];
    for a in market.arms() {
        println!("{a}: pulled {:>5} times, mean estimate {:.3}", states.success_count(a), states.empirical_mean(a).unwrap_or(f64::NAN));
    }
    let counts = event_counters(&trace);
    let bound = 6.0 * (horizon as f64).ln() + 6.0;
    for (j, row) in counts.mistaken_pulls[0].iter().enumerate() {
        println!("a{} over better arms: {:?} (bound {bound:.1} each)", j + 1, row);
    }
    let regret = realized_regret(&trace, &[ArmId(4)]);
    println!("realized regret against a5: {:.1}", regret.final_values()[0]);
}
