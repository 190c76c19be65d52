//! Regret and instability for growing random markets. Pass a smaller horizon
//! as the first argument for a quick look.

use caucb::experiments::{preset, run_cell};
use caucb::metrics::aggregate;

fn main() {
    let horizon: u64 = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("horizon"));
    let mut spec = preset("size_sweep").unwrap();
    for cell in &mut spec.cells {
        cell.config.horizon = horizon;
    }
    println!("{:>5} {:>14} {:>10} {:>16}", "cell", "max regret", "std", "unstable rounds");
    for cell in &spec.cells {
        let result = run_cell(&spec, cell).unwrap();
        let agg = aggregate(&result.max_player_regret()).unwrap();
        let t = horizon as usize - 1;
        println!(
            "{:>5} {:>14.1} {:>10.1} {:>16.1}",
            cell.label,
            agg.mean[t],
            agg.std[t],
            result.mean_cumulative_unstable(horizon as usize)
        );
    }
}
