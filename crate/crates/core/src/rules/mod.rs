//! Precondition/effect rules: the only way the hidden world changes.

mod effect;
mod engine;
mod predicate;
mod term;

pub use effect::{apply_effect_set, Effect, EffectSet, Placement};
pub use engine::{
    apply_rule, check_preconditions, execute_in_place, execute_primitive, ground_rule, ActionPattern, Execution,
    Feedback, PrimitiveAction, RuleBase, RuleError, Violation, WorldRule,
};
pub use predicate::{GroundPredicate, HandSel, Predicate};
pub use term::{Binding, Term};

use crate::syntax::SyntaxError;

impl WorldRule {
    /// Builds a rule from its textual parts.
    pub fn from_text(
        rule_id: &str,
        source: &str,
        action: &str,
        preconditions: &[&str],
        effects: &[&str],
    ) -> Result<Self, SyntaxError> {
        Ok(Self {
            rule_id: rule_id.to_string(),
            source: source.to_string(),
            pattern: ActionPattern::parse(action)?,
            preconditions: preconditions
                .iter()
                .map(|p| Predicate::parse(p))
                .collect::<Result<_, _>>()?,
            effects: effects.iter().map(|e| Effect::parse(e)).collect::<Result<_, _>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Amount, Edge, Node, NodeKind, Relation, ScenarioInit, Slot, WorldGraph};

    fn kitchen() -> WorldGraph {
        WorldGraph::instantiate(&ScenarioInit {
            areas: vec!["coffee_area".into(), "prep_area".into()],
            nodes: vec![
                Node::object("coffee_machine", "coffee_machine", "coffee_area")
                    .with_state("closed")
                    .with_flag("loaded", "false"),
                Node::object("cup_01", "cup", "coffee_area")
                    .with_state("empty")
                    .with_flag("position", "counter"),
                Node::object("capsule_01", "capsule", "coffee_area"),
                Node::object("cucumber_01", "cucumber", "prep_area").with_state("whole"),
                Node::object("knife_01", "knife", "prep_area"),
            ],
            edges: vec![],
            agent_start: "coffee_area".into(),
            image_refs: Default::default(),
        })
        .unwrap()
    }

    fn rules() -> RuleBase {
        let r = |id: &str, action: &str, pre: &[&str], eff: &[&str]| {
            WorldRule::from_text(id, "test", action, pre, eff).unwrap()
        };
        RuleBase::new(vec![
            r("go", "go_to(?a:area)", &[], &["move_agent(?a)"]),
            r(
                "pick",
                "pick_up(?o)",
                &["at(?o, here)", "hand(any, empty)"],
                &["detach(?o)", "grab(?o)"],
            ),
            r(
                "open-machine",
                "open(?m:coffee_machine)",
                &["state(?m, closed)"],
                &["set(?m, open)"],
            ),
            r("open-any", "open(?x)", &[], &["set(?x, open)"]),
            r(
                "insert-capsule",
                "insert(?c:capsule, ?m:coffee_machine)",
                &["state(?m, open)", "state(?m, loaded=false)", "hand(any, ?c)"],
                &["set(?m, loaded=true)", "release(?c)", "link(?m, contains, ?c)"],
            ),
            r(
                "brew",
                "brew(?m:coffee_machine)",
                &[
                    "state(?m, loaded=true)",
                    "state(?cup:cup, position=under)",
                    "hand(any, empty)",
                ],
                &[
                    "add(brewed_coffee_#, brewed_coffee, substance, in=?cup, amount=full)",
                    "set(?cup, full)",
                ],
            ),
            r(
                "consume",
                "consume(?c:capsule)",
                &["state(?c, used=true)", "hand(any, ?c)"],
                &["remove(?c)"],
            ),
            r(
                "slice-with-tool",
                "slice(?o, ?k:knife)",
                &["state(?o, whole)", "hand(any, ?k)"],
                &["set(?o, sliced)"],
            ),
        ])
    }

    fn act(s: &str) -> PrimitiveAction {
        s.parse().unwrap()
    }

    fn run(g: &mut WorldGraph, actions: &[&str]) {
        for a in actions {
            let exec = execute_in_place(g, &rules(), &act(a));
            assert_eq!(exec.feedback, Feedback::Success, "{a}");
        }
    }

    #[test]
    fn match_rule_examples() {
        let g = kitchen();
        let rb = rules();
        let (r, b) = rb.match_rule(&g, &act("slice(cucumber_01, knife_01)")).unwrap();
        assert_eq!(r.rule_id, "slice-with-tool");
        assert_eq!(b["o"], "cucumber_01");
        assert!(rb.match_rule(&g, &act("teleport(cup_01)")).is_none());
        // Both open rules unify with the machine; load order decides.
        assert_eq!(
            rb.match_rule(&g, &act("open(coffee_machine)")).unwrap().0.rule_id,
            "open-machine"
        );
        assert_eq!(rb.match_rule(&g, &act("open(cup_01)")).unwrap().0.rule_id, "open-any");
    }

    #[test]
    fn insert_preconditions_in_order() {
        let mut g = kitchen();
        run(&mut g, &["pick_up(capsule_01)"]);
        let rb = rules();
        let action = act("insert(capsule_01, coffee_machine)");
        let (rule, binding) = rb.match_rule(&g, &action).unwrap();
        let violated = check_preconditions(rule, &g, &binding).unwrap().unwrap_err();
        assert_eq!(violated.to_string(), "state(coffee_machine, open)");

        run(&mut g, &["open(coffee_machine)"]);
        assert!(check_preconditions(rule, &g, &binding).unwrap().is_ok());
    }

    #[test]
    fn brew_reports_second_predicate_with_label() {
        let mut g = kitchen();
        run(
            &mut g,
            &[
                "pick_up(capsule_01)",
                "open(coffee_machine)",
                "insert(capsule_01, coffee_machine)",
            ],
        );
        let rb = rules();
        let (rule, binding) = rb.match_rule(&g, &act("brew(coffee_machine)")).unwrap();
        let violated = check_preconditions(rule, &g, &binding).unwrap().unwrap_err();
        assert_eq!(violated.to_string(), "state(cup, position=under)");
    }

    #[test]
    fn brew_creates_substance_in_cup() {
        let mut g = kitchen();
        run(
            &mut g,
            &[
                "pick_up(capsule_01)",
                "open(coffee_machine)",
                "insert(capsule_01, coffee_machine)",
            ],
        );
        g.nodes_mut()
            .get_mut("cup_01")
            .unwrap()
            .set_slot(&Slot::Flag("position".into()), Some("under".into()))
            .unwrap();
        run(&mut g, &["brew(coffee_machine)"]);
        let coffee = g.lookup_instance("brewed_coffee_01").unwrap();
        assert_eq!(coffee.kind, NodeKind::Substance);
        assert_eq!(coffee.amount, Some(Amount::Full));
        assert!(g.has_edge("cup_01", Relation::Contains, "brewed_coffee_01"));
    }

    #[test]
    fn slice_changes_state() {
        let mut g = kitchen();
        run(
            &mut g,
            &["go_to(prep_area)", "pick_up(knife_01)", "slice(cucumber_01, knife_01)"],
        );
        assert_eq!(g.slot_value("cucumber_01", &Slot::State).as_deref(), Some("sliced"));
    }

    #[test]
    fn consume_removes_node_without_dangling_edges() {
        let mut g = kitchen();
        run(&mut g, &["pick_up(capsule_01)"]);
        g.nodes_mut()
            .get_mut("capsule_01")
            .unwrap()
            .set_slot(&Slot::Flag("used".into()), Some("true".into()))
            .unwrap();
        g.edges_mut()
            .insert(Edge::new("coffee_machine", Relation::Functional, "capsule_01"));
        run(&mut g, &["consume(capsule_01)"]);
        assert!(g.lookup_instance("capsule_01").is_none());
        assert!(g.edges().iter().all(|e| e.src != "capsule_01" && e.dst != "capsule_01"));
        assert_eq!(g.agent().held().count(), 0);
    }

    #[test]
    fn failures_leave_graph_untouched() {
        let g = kitchen();
        let before = g.snapshot_hash();
        let (g2, fb) = execute_primitive(&g, &rules(), &act("insert(capsule_01, coffee_machine)"));
        assert!(matches!(fb, Feedback::Fail { .. }));
        assert_eq!(g2.snapshot_hash(), before);
        assert_eq!(g2.step(), 0);
        let (g3, fb) = execute_primitive(&g, &rules(), &act("teleport(cup_01)"));
        assert_eq!(fb, Feedback::NoRule);
        assert_eq!(g3.snapshot_hash(), before);
    }

    #[test]
    fn success_bumps_step_and_is_pure() {
        let g = kitchen();
        let (a, fa) = execute_primitive(&g, &rules(), &act("open(coffee_machine)"));
        let (b, fb) = execute_primitive(&g, &rules(), &act("open(coffee_machine)"));
        assert_eq!((fa, a.step()), (Feedback::Success, 1));
        assert_eq!(fb, Feedback::Success);
        assert_eq!(a, b);
        assert_eq!(a.slot_value("coffee_machine", &Slot::State).as_deref(), Some("open"));
    }

    #[test]
    fn held_objects_travel_with_agent() {
        let mut g = kitchen();
        run(&mut g, &["pick_up(cup_01)", "go_to(prep_area)"]);
        assert_eq!(g.slot_value("cup_01", &Slot::Location).as_deref(), Some("prep_area"));
    }

    #[test]
    fn integrity_violations_become_failures() {
        let mut g = kitchen();
        let rb = RuleBase::new(vec![WorldRule::from_text(
            "bad",
            "test",
            "grab_all(?o)",
            &[],
            &["grab(?o)", "grab(cup_01)", "grab(coffee_machine)"],
        )
        .unwrap()]);
        let before = g.snapshot_hash();
        let exec = execute_in_place(&mut g, &rb, &act("grab_all(capsule_01)"));
        assert!(matches!(
            exec.feedback,
            Feedback::Fail {
                violated: Violation::Integrity(_)
            }
        ));
        assert_eq!(g.snapshot_hash(), before);
    }

    #[test]
    fn unbound_effect_variable_is_reported() {
        let g = kitchen();
        let rule = WorldRule::from_text("r", "test", "poke(?o)", &[], &["set(?ghost, open)"]).unwrap();
        let b = rule.pattern.unify(&g, &act("poke(cup_01)")).unwrap();
        assert!(matches!(
            check_preconditions(&rule, &g, &b),
            Err(RuleError::UnboundVariable { var, .. }) if var == "ghost"
        ));
    }

    #[test]
    fn feedback_serde() {
        let fb = Feedback::Fail {
            violated: Violation::Predicate("state(coffee_machine, open)".parse().unwrap()),
        };
        let json = serde_json::to_string(&fb).unwrap();
        assert_eq!(json, r#"{"outcome":"fail","violated":"state(coffee_machine, open)"}"#);
        assert_eq!(serde_json::from_str::<Feedback>(&json).unwrap(), fb);
    }

    #[test]
    fn primitive_action_text() {
        assert_eq!(act("wait()").to_string(), "wait()");
        assert_eq!(act("go_to(sink)").to_string(), "go_to(sink)");
        assert_eq!(act("insert(a, b)").to_string(), "insert(a, b)");
        assert!("insert(a, b, c)".parse::<PrimitiveAction>().is_err());
    }
}
