//! Stable matchings of a small market: enumeration, deferred acceptance and
//! blocking pairs.

use caucb::market::{examples, ArmId};
use caucb::stable_matching::{
    blocking_pairs, deferred_acceptance, enumerate_stable, player_consistent_blocking_pairs, Matching, ProposingSide,
};

fn show(m: &Matching) -> String {
    m.pairs().iter().map(|(p, a)| format!("(p{},a{})", p + 1, a + 1)).collect::<Vec<_>>().join(" ")
}

fn main() {
    let market = examples::three_player_cycle();
    let set = enumerate_stable(&market).unwrap();
    println!("{} stable matchings:", set.matchings.len());
    for m in &set.matchings {
        println!("  {}", show(m));
    }
    println!("players propose: {}", show(&deferred_acceptance(&market, ProposingSide::Players)));
    println!("arms propose:    {}", show(&deferred_acceptance(&market, ProposingSide::Arms)));

    let identity = Matching::complete(&[ArmId(0), ArmId(1), ArmId(2)]).unwrap();
    let pairs: Vec<String> = blocking_pairs(&market, &identity).iter().map(|b| format!("({},{})", b.player, b.arm)).collect();
    println!("identity is blocked by {}", pairs.join(" "));
    for b in player_consistent_blocking_pairs(&market, &identity) {
        println!("  {} would move to {}", b.player, b.arm);
    }
}
