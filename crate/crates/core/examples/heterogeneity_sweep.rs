//! Final regret as player preferences go from independent (beta = 0) to
//! nearly shared (large beta).

use caucb::experiments::{preset, run_cell};

fn main() {
    let horizon: u64 = std::env::args().nth(1).map_or(5000, |s| s.parse().expect("horizon"));
    let mut spec = preset("hetero_sweep").unwrap();
    for cell in &mut spec.cells {
        cell.config.horizon = horizon;
    }
    for cell in &spec.cells {
        let result = run_cell(&spec, cell).unwrap();
        println!(
            "{:<8} mean final max regret {:>8.1}, mean unstable rounds {:>7.1}",
            cell.label,
            result.mean_final_max_regret(),
            result.mean_cumulative_unstable(horizon as usize)
        );
    }
}
