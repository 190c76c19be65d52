//! Resolving random player-consistent blocking pairs, one at a time, until
//! the profile is stable.

use caucb::market::gen_uniform;
use caucb::rng;
use caucb::stable_matching::{is_stable, player_consistent_blocking_pairs, resolve_blocking_pair, AttemptProfile};
use caucb::ArmId;
use rand::seq::IndexedRandom;

fn main() {
    let mut r = rng::stream(2024, 0);
    let market = gen_uniform(4, 4, &mut r).unwrap();
    let mut profile = AttemptProfile::new(vec![ArmId(0); 4]);
    let mut steps = 0;
    while !is_stable(&market, &profile) {
        let pairs = player_consistent_blocking_pairs(&market, &profile.induced_matching(&market));
        let pair = *pairs.choose(&mut r).unwrap();
        profile = resolve_blocking_pair(&market, &profile, pair).unwrap();
        steps += 1;
        let names: Vec<String> = profile.attempts().iter().map(ToString::to_string).collect();
        println!("step {steps}: {} -> {}, profile {}", pair.player, pair.arm, names.join(" "));
    }
    println!("stable after {steps} resolutions");
}
