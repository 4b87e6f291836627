//! Property tests over the engine, observation and metrics.

use hwsim_core::eval::{action_f1, changed_slots, paired_bootstrap, replay};
use hwsim_core::graph::WorldGraph;
use hwsim_core::observation::{apply_delta, graph_diff, local_subgraph};
use hwsim_core::rules::{execute_in_place, PrimitiveAction};
use hwsim_core::scenario::{bundled, Episode};
use proptest::prelude::*;
use proptest::sample::select;

fn coffee() -> &'static Episode {
    static EP: std::sync::OnceLock<Episode> = std::sync::OnceLock::new();
    EP.get_or_init(|| bundled::episode("coffee").unwrap())
}

fn actions() -> impl Strategy<Value = Vec<PrimitiveAction>> {
    let ep = coffee();
    let gt: Vec<PrimitiveAction> = ep.gt_chains.iter().flatten().cloned().collect();
    prop::collection::vec(select(gt), 0..16)
}

fn run(ep: &Episode, acts: &[PrimitiveAction]) -> WorldGraph {
    let mut g = ep.init.clone();
    for a in acts {
        execute_in_place(&mut g, &ep.rules, a);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_json_round_trips(acts in actions()) {
        let g = run(coffee(), &acts);
        let back = WorldGraph::from_canonical_json(&g.to_canonical_json()).unwrap();
        prop_assert_eq!(back.snapshot_hash(), g.snapshot_hash());
    }

    #[test]
    fn replay_end_matches_direct_execution(acts in actions()) {
        let ep = coffee();
        let r = replay(ep, &ep.init, &acts);
        prop_assert_eq!(r.end.snapshot_hash(), run(ep, &acts).snapshot_hash());
        prop_assert!(r.valid <= r.attempted);
    }

    #[test]
    fn graph_diff_patches_every_area(acts in actions()) {
        let ep = coffee();
        let g = run(ep, &acts);
        for area in g.areas() {
            let d = graph_diff(&ep.init, &g, area).unwrap();
            let rebuilt = apply_delta(&local_subgraph(&ep.init, area).unwrap(), &d).unwrap();
            prop_assert_eq!(rebuilt, local_subgraph(&g, area).unwrap());
        }
    }

    #[test]
    fn changed_slots_are_symmetric(a in actions(), b in actions()) {
        let ep = coffee();
        let (ga, gb) = (run(ep, &a), run(ep, &b));
        prop_assert_eq!(changed_slots(&ga, &gb), changed_slots(&gb, &ga));
        prop_assert!(changed_slots(&ga, &ga).is_empty());
    }

    #[test]
    fn f1_is_bounded_and_symmetric(
        g in prop::collection::vec(select(vec!["open", "close", "go_to", "wait"]), 0..8),
        p in prop::collection::vec(select(vec!["open", "close", "go_to", "wait"]), 0..8),
    ) {
        let x = action_f1(g.iter().copied(), p.iter().copied());
        let y = action_f1(p.iter().copied(), g.iter().copied());
        prop_assert!((0.0..=1.0).contains(&x.f1));
        prop_assert!((x.f1 - y.f1).abs() < 1e-12);
        prop_assert!((x.precision - y.recall).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_ci_brackets_and_is_seeded(
        a in prop::collection::vec(0.0f64..1.0, 1..30),
        shift in -0.5f64..0.5,
        seed in any::<u64>(),
    ) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let r = paired_bootstrap(&a, &b, 200, seed).unwrap();
        prop_assert!(r.ci_low <= r.ci_high);
        prop_assert!((0.0..=1.0).contains(&r.p));
        prop_assert_eq!(r, paired_bootstrap(&a, &b, 200, seed).unwrap());
    }
}
