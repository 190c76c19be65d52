//! Acceptance suite: every exit criterion of the library, each with its
//! tolerance and wall-clock budget pinned here.
//!
//! The criteria run sequentially inside one test so their timings do not
//! compete for CPU. One `[PASS]`/`[FAIL]` line per criterion goes straight to
//! stderr, so it shows up even without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use caucb::engine::{run, AgentPolicy, Simulation, SimulationConfig};
use caucb::experiments::{preset, run_cell};
use caucb::market::{gen_globally_ranked, gen_uniform, ArmId, Market, PlayerId};
use caucb::metrics::{event_counters, global_rank_regret_bound, instability, pessimal_regret};
use caucb::rng;
use caucb::stable_matching::{deferred_acceptance, enumerate_stable, is_stable, ProposingSide};

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn arms(v: &[usize]) -> Vec<ArmId> {
    v.iter().map(|&a| ArmId(a)).collect()
}

/// 1. Two-player cycle without delays: attempts alternate (a2,a2), (a1,a1).
fn example1_cycle() -> Outcome {
    let spec = preset("example1").unwrap();
    let cell = run_cell(&spec, &spec.cells[0]).unwrap();
    let trace = &cell.replications[0].trace;
    let mut bad = Vec::new();
    for r in &trace.rounds {
        let want = if r.t % 2 == 0 { arms(&[1, 1]) } else { arms(&[0, 0]) };
        if r.attempts.attempts() != want.as_slice() {
            bad.push(r.t);
        }
    }
    check(
        trace.rounds.len() == 100 && bad.is_empty(),
        format!("{} rounds, {} off-pattern rounds", trace.rounds.len(), bad.len()),
    )
}

/// 2. Three-player cycle with perfect rankings: period 3, a conflict every round.
fn example3_cycle() -> Outcome {
    let spec = preset("example3").unwrap();
    let cell = run_cell(&spec, &spec.cells[0]).unwrap();
    let rounds = &cell.replications[0].trace.rounds;
    let expected = [arms(&[1, 0, 1]), arms(&[2, 0, 0]), arms(&[2, 2, 1])];
    let pattern_ok = rounds
        .iter()
        .enumerate()
        .all(|(i, r)| r.attempts.attempts() == expected[i % 3].as_slice());
    let periodic = rounds.windows(4).all(|w| w[0].attempts == w[3].attempts);
    let conflicts = rounds.iter().filter(|r| r.conflicts() > 0).count();
    check(
        rounds.len() == 100 && pattern_ok && periodic && conflicts == 100,
        format!("pattern {pattern_ok}, period-3 {periodic}, conflict rounds {conflicts}/100"),
    )
}

/// 3. Deferred acceptance agrees with brute-force optimal/pessimal partners.
fn da_matches_enumeration() -> Outcome {
    let mut r = rng::stream(303, 0);
    let mut mismatches = 0;
    for i in 0..200 {
        let n = 2 + i % 4;
        let m = gen_uniform(n, n, &mut r).unwrap();
        let set = enumerate_stable(&m).unwrap();
        let opt = deferred_acceptance(&m, ProposingSide::Players).as_total().unwrap();
        let pes = deferred_acceptance(&m, ProposingSide::Arms).as_total().unwrap();
        if opt != set.optimal_match || pes != set.pessimal_match {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches}/200 markets disagree"))
}

/// 4. Perfect-ranking agents started at a stable matching never move.
fn stability_preserved() -> Outcome {
    let mut r = rng::stream(404, 0);
    let markets: Vec<Market> = (0..50).map(|_| gen_uniform(5, 5, &mut r).unwrap()).collect();
    let mut moved = 0;
    for lambda in [0.0, 0.1, 0.5] {
        for (i, m) in markets.iter().enumerate() {
            let set = enumerate_stable(m).unwrap();
            let start = set.matchings[i % set.matchings.len()].as_total().unwrap();
            let idx: Vec<usize> = start.iter().map(|a| a.0).collect();
            let cfg = SimulationConfig::new(lambda, 1000, i as u64).with_initial_attempts(&idx);
            let trace = run(m, &[AgentPolicy::OracleRank; 5], &cfg).unwrap();
            if trace.rounds.iter().any(|r| r.attempts.attempts() != start.as_slice()) {
                moved += 1;
            }
        }
    }
    check(moved == 0, format!("{moved}/150 runs left their stable matching"))
}

/// 5. Perfect-ranking agents with delays reach stability from random starts.
fn path_to_stability() -> Outcome {
    let mut r = rng::stream(505, 0);
    let trials = 1000;
    let mut reached = 0;
    for i in 0..trials {
        let m = gen_uniform(4, 4, &mut r).unwrap();
        let mut sim = Simulation::new(&m, vec![AgentPolicy::OracleRank; 4], SimulationConfig::new(0.5, 500, i)).unwrap();
        for _ in 0..500 {
            if is_stable(&m, &sim.step().attempts) {
                reached += 1;
                break;
            }
        }
    }
    let rate = reached as f64 / trials as f64;
    check(rate >= 0.99, format!("reached stability in {reached}/{trials} trials ({rate:.3}, need >= 0.99)"))
}

/// 6. Single-player mistaken pulls stay under 1.2 * (6 ln T / Δ² + 6).
fn ucb_mistake_bound() -> Outcome {
    let horizon = 5000u64;
    let m = Market::new(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]], vec![vec![0]; 5]).unwrap();
    let seeds = 20;
    let mut totals = vec![vec![0u64; 5]; 5];
    for seed in 0..seeds {
        let trace = run(&m, &[AgentPolicy::CaUcb], &SimulationConfig::new(0.0, horizon, seed)).unwrap();
        let c = event_counters(&trace);
        for (total, counts) in totals.iter_mut().zip(&c.mistaken_pulls[0]) {
            for (t, c) in total.iter_mut().zip(counts) {
                *t += c;
            }
        }
    }
    let delta = m.min_gap();
    let bound = 6.0 * (horizon as f64).ln() / (delta * delta) + 6.0;
    let worst = (0..5)
        .flat_map(|j| (j + 1..5).map(move |k| (j, k)))
        .map(|(j, k)| totals[j][k] as f64 / seeds as f64)
        .fold(0.0, f64::max);
    check(worst <= 1.2 * bound, format!("max mean count {worst:.1}, limit {:.1}", 1.2 * bound))
}

/// 7. Globally ranked markets without delays settle into the stable matching.
///
/// The regret ceiling is a sanity check only. When the bottom-ranked player's
/// stable arm is also its worst arm the ceiling collapses to zero, yet that
/// player still loses early conflicts and goes unmatched; those cases are
/// reported but not held against the criterion.
fn globally_ranked_convergence() -> Outcome {
    let horizon = 5000u64;
    let mut late = 0.0;
    let mut decreasing = true;
    let mut over_ceiling = 0;
    let mut degenerate = Vec::new();
    let seeds = 10;
    for seed in 0..seeds {
        let m = gen_globally_ranked(5, 5, &mut rng::stream(707 + seed, 0)).unwrap();
        let set = enumerate_stable(&m).unwrap();
        let trace = run(&m, &[AgentPolicy::CaUcb; 5], &SimulationConfig::new(0.0, horizon, seed)).unwrap();
        let s = instability(&trace);
        late += s.unstable_between(4500, 5000) as f64 / 501.0;
        decreasing &= s.unstable_between(2501, 5000) <= s.unstable_between(1, 2500);
        let regret = pessimal_regret(&trace, &set.pessimal_match);
        for p in m.players() {
            let bound = global_rank_regret_bound(&m, &set.pessimal_match, p, horizon);
            let r = regret.at(p, horizon as usize);
            if bound == 0.0 {
                degenerate.push(r);
            } else if r > bound {
                over_ceiling += 1;
            }
        }
    }
    late /= seeds as f64;
    check(
        late <= 0.15 && decreasing && over_ceiling == 0,
        format!(
            "late unstable fraction {late:.3} (<= 0.15), second half <= first half: {decreasing}, \
             runs over regret ceiling {over_ceiling}, zero-ceiling regrets {degenerate:?}"
        ),
    )
}

/// 8. General preferences converge; larger markets converge more slowly.
fn size_sweep_convergence() -> Outcome {
    let spec = preset("size_sweep").unwrap();
    let mut late = f64::NAN;
    let mut cumulative = Vec::new();
    for cell in &spec.cells {
        let result = run_cell(&spec, cell).unwrap();
        if cell.label == "N=5" {
            late = result.mean_instability(4900, 5000);
        }
        cumulative.push(result.mean_cumulative_unstable(5000));
    }
    let monotone = cumulative.windows(2).all(|w| w[0] <= w[1]);
    check(
        late <= 0.10 && monotone,
        format!("N=5 late instability {late:.3} (<= 0.10); mean unstable rounds by N {cumulative:.1?}"),
    )
}

/// 9. Preference correlation barely changes the final regret.
fn heterogeneity_insensitivity() -> Outcome {
    let spec = preset("hetero_sweep").unwrap();
    let finals: Vec<f64> = spec
        .cells
        .iter()
        .map(|c| run_cell(&spec, c).unwrap().mean_final_max_regret())
        .collect();
    let max = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finals.iter().copied().fold(f64::INFINITY, f64::min);
    check(max <= 1.5 * min, format!("final mean max regret by beta {finals:.1?}, ratio {:.2}", max / min))
}

/// 10. The scripted deviator earns negative, decreasing stable regret.
fn deviator_gain() -> Outcome {
    let spec = preset("deviator").unwrap();
    let cell = run_cell(&spec, &spec.cells[0]).unwrap();
    let k = cell.replications.len() as f64;
    let mean_at = |t: usize| {
        cell.replications.iter().map(|r| r.regret_pessimal.at(PlayerId(2), t)).sum::<f64>() / k
    };
    let (mid, end) = (mean_at(5001), mean_at(9999));
    check(end < 0.0 && end < mid, format!("p3 regret {mid:.1} at T=5001, {end:.1} at T=9999"))
}

#[test]
fn acceptance_criteria() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 example-1 alternation", Duration::from_secs(1), example1_cycle),
        ("2 example-3 conflict cycle", Duration::from_secs(1), example3_cycle),
        ("3 deferred acceptance = enumeration", Duration::from_secs(5), da_matches_enumeration),
        ("4 stability preservation", Duration::from_secs(5), stability_preserved),
        ("5 path to stability", Duration::from_secs(30), path_to_stability),
        ("6 single-player mistake bound", Duration::from_secs(10), ucb_mistake_bound),
        ("7 globally ranked convergence", Duration::from_secs(10), globally_ranked_convergence),
        ("8 size sweep convergence", Duration::from_secs(180), size_sweep_convergence),
        ("9 heterogeneity insensitivity", Duration::from_secs(180), heterogeneity_insensitivity),
        ("10 deviator gain", Duration::from_secs(30), deviator_gain),
    ];
    let mut failed = Vec::new();
    for (name, budget, criterion) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let elapsed = start.elapsed();
        let ok = outcome.passed && elapsed <= budget;
        // bypasses libtest's capture of print!/eprint!
        let _ = writeln!(
            std::io::stderr(),
            "[{}] criterion {name}: {} ({:.2}s, budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
