//! A player who ignores the protocol and follows a fixed three-round script
//! ends up with negative stable regret.

use caucb::experiments::{preset, run_cell};
use caucb::PlayerId;

fn main() {
    let spec = preset("deviator").unwrap();
    let cell = run_cell(&spec, &spec.cells[0]).unwrap();
    for rep in &cell.replications {
        let finals: Vec<String> = rep.regret_pessimal.final_values().iter().map(|r| format!("{r:>9.1}")).collect();
        println!("replication {}: regret {}", rep.replication, finals.join(" "));
    }
    let k = cell.replications.len() as f64;
    for t in [1000, 5001, 9999] {
        let mean = cell.replications.iter().map(|r| r.regret_pessimal.at(PlayerId(2), t)).sum::<f64>() / k;
        println!("deviator mean regret at t={t}: {mean:.1}");
    }
}
