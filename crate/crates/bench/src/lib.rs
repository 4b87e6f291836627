//! Shared fixtures for the benchmarks.

use hwsim_core::graph::WorldGraph;
use hwsim_core::scenario::{bundled, compile_episode, parse_scenario, Dataset, Episode, TransitionRecord};

/// Every bundled scenario's records paired with their pre snapshot, cycled to `n` entries.
pub fn replay_corpus(n: usize) -> Vec<(WorldGraph, TransitionRecord)> {
    let mut base = Vec::new();
    for (_, text) in bundled::ALL {
        let s = parse_scenario(text).expect("bundled scenario parses");
        let (ep, records) = compile_episode(&s).expect("bundled scenario compiles");
        let ds = Dataset::new(&ep, &records);
        for r in ds.all_records() {
            base.push((ds.snapshots[&r.pre_state_ref].clone(), r.clone()));
        }
    }
    base.iter().cycle().take(n).cloned().collect()
}

pub fn coffee() -> Episode {
    bundled::episode("coffee").expect("bundled")
}
