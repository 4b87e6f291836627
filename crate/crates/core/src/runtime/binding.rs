//! Grounding planner arguments against the belief graph.

use std::cmp::Ordering;

use thiserror::Error;

use crate::belief::{BeliefGraph, BeliefNode, BeliefValue};
use crate::graph::Slot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("believed position `{0}` is not an area")]
    UnknownArea(String),
}

/// An attribute the bound node must be believed to have.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub slot: Slot,
    pub value: String,
}

fn hypothesis_rank(n: &BeliefNode, constraints: &[Constraint]) -> bool {
    n.position.as_ref().is_some_and(BeliefValue::is_hypothesis)
        || constraints
            .iter()
            .any(|c| n.state(&c.slot).is_some_and(BeliefValue::is_hypothesis))
}

fn satisfies(n: &BeliefNode, c: &Constraint) -> bool {
    n.state(&c.slot).and_then(BeliefValue::concrete) == Some(c.value.as_str())
}

/// Best node with `label` meeting `constraints`: observed before hypothesis,
/// then highest confidence, most recent observation, smallest id.
pub fn bind_instance(b: &BeliefGraph, label: &str, constraints: &[Constraint]) -> Option<String> {
    b.nodes
        .values()
        .filter(|n| n.label == label && constraints.iter().all(|c| satisfies(n, c)))
        .min_by(|x, y| {
            hypothesis_rank(x, constraints)
                .cmp(&hypothesis_rank(y, constraints))
                .then_with(|| {
                    y.meta
                        .confidence
                        .partial_cmp(&x.meta.confidence)
                        .unwrap_or(Ordering::Equal)
                })
                .then_with(|| y.meta.last_observed_step.cmp(&x.meta.last_observed_step))
                .then_with(|| x.instance_id.cmp(&y.instance_id))
        })
        .map(|n| n.instance_id.clone())
}

/// Where a skill must run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub area: String,
    /// The position came from a hypothesis or a low-confidence belief.
    pub low_confidence: bool,
}

/// Area of the skill's first argument not held by the agent; navigation
/// skills route to their own target. `None` when nothing pins the skill
/// to an area (arguments unknown to the belief, or all held).
pub fn route_area(
    b: &BeliefGraph,
    areas: &[String],
    skill_id: &str,
    args: &[String],
    held: &[&str],
) -> Result<Option<Route>, RouteError> {
    if skill_id == "navigate_to" {
        return Ok(args.first().map(|a| Route {
            area: a.clone(),
            low_confidence: false,
        }));
    }
    for a in args {
        if areas.contains(a) {
            return Ok(Some(Route {
                area: a.clone(),
                low_confidence: false,
            }));
        }
        if held.contains(&a.as_str()) {
            continue;
        }
        let Some(n) = b.node(a) else { continue };
        let Some(pos) = n.position.as_ref().and_then(BeliefValue::concrete) else {
            continue;
        };
        if !areas.iter().any(|x| x == pos) {
            return Err(RouteError::UnknownArea(pos.to_string()));
        }
        return Ok(Some(Route {
            area: pos.to_string(),
            low_confidence: n.position.as_ref().is_some_and(BeliefValue::is_hypothesis)
                || n.meta.confidence < super::oracle::VISUAL_TRIGGER_CONFIDENCE,
        }));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefMeta, Source};
    use std::collections::BTreeMap;

    fn node(id: &str, label: &str, area: BeliefValue, conf: f64, step: u64) -> BeliefNode {
        BeliefNode {
            instance_id: id.into(),
            label: label.into(),
            position: Some(area),
            states: BTreeMap::new(),
            meta: BeliefMeta {
                source: Source::StateChange,
                confidence: conf,
                last_observed_step: Some(step),
            },
        }
    }

    fn belief(nodes: Vec<BeliefNode>) -> BeliefGraph {
        BeliefGraph {
            current_step: 10,
            nodes: nodes.into_iter().map(|n| (n.instance_id.clone(), n)).collect(),
            edges: Default::default(),
        }
    }

    fn at(a: &str) -> BeliefValue {
        BeliefValue::Observed(a.into())
    }

    #[test]
    fn binding_preferences() {
        let b = belief(vec![
            node("cup_01", "cup", at("sink"), 0.6, 9),
            node("cup_02", "cup", at("sink"), 0.9, 1),
        ]);
        assert_eq!(bind_instance(&b, "cup", &[]).as_deref(), Some("cup_02"));
        let b = belief(vec![
            node("cup_01", "cup", at("sink"), 0.8, 3),
            node("cup_02", "cup", at("sink"), 0.8, 7),
        ]);
        assert_eq!(bind_instance(&b, "cup", &[]).as_deref(), Some("cup_02"));
        let b = belief(vec![
            node("cup_02", "cup", at("sink"), 0.8, 7),
            node("cup_01", "cup", at("sink"), 0.8, 7),
        ]);
        assert_eq!(bind_instance(&b, "cup", &[]).as_deref(), Some("cup_01"));
        assert_eq!(bind_instance(&b, "capsule", &[]), None);
        let b = belief(vec![
            node("cup_01", "cup", BeliefValue::Hypothesis("sink".into()), 1.0, 9),
            node("cup_02", "cup", at("sink"), 0.2, 1),
        ]);
        assert_eq!(bind_instance(&b, "cup", &[]).as_deref(), Some("cup_02"));
    }

    #[test]
    fn constraints_filter_candidates() {
        let mut full = node("cup_01", "cup", at("sink"), 1.0, 9);
        full.states.insert("state".into(), at("full"));
        let mut empty = node("cup_02", "cup", at("sink"), 0.5, 1);
        empty.states.insert("state".into(), at("empty"));
        let b = belief(vec![full, empty]);
        let c = [Constraint {
            slot: Slot::State,
            value: "empty".into(),
        }];
        assert_eq!(bind_instance(&b, "cup", &c).as_deref(), Some("cup_02"));
    }

    #[test]
    fn routing() {
        let areas = vec!["coffee_area".to_string(), "sink".to_string()];
        let b = belief(vec![
            node("cup_01", "cup", at("coffee_area"), 1.0, 9),
            node("mug_01", "mug", BeliefValue::Hypothesis("sink".into()), 0.3, 9),
            node("odd_01", "odd", at("attic"), 1.0, 9),
        ]);
        let r = |skill: &str, args: &[&str], held: &[&str]| {
            let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
            route_area(&b, &areas, skill, &args, held)
        };
        assert_eq!(r("fetch", &["cup_01"], &[]).unwrap().unwrap().area, "coffee_area");
        assert_eq!(r("navigate_to", &["sink"], &[]).unwrap().unwrap().area, "sink");
        let low = r("fetch", &["mug_01"], &[]).unwrap().unwrap();
        assert_eq!((low.area.as_str(), low.low_confidence), ("sink", true));
        assert_eq!(
            r("fetch", &["odd_01"], &[]),
            Err(RouteError::UnknownArea("attic".into()))
        );
        assert_eq!(r("fetch", &["cup_01"], &["cup_01"]).unwrap(), None);
        assert_eq!(r("fetch", &["ghost"], &[]).unwrap(), None);
    }
}
