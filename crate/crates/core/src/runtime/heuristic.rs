//! Rule-template planner: goal patterns → fixed skill lists, grounded by the runner.

use std::str::FromStr;

use serde::Deserialize;

use super::planner::{PlanError, PlanRequest, Planner, RepairRequest};
use crate::belief::{BeliefGraph, BeliefValue};
use crate::graph::{AgentPhysState, Relation, Slot};
use crate::rules::{PrimitiveAction, Violation};
use crate::syntax::{Call, SyntaxError};
use crate::task::{GoalClause, SkillCall};

const BUNDLED: &str = include_str!("templates.toml");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Clause(GoalClause),
    Holding(String),
}

impl FromStr for Condition {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        if call.name == "holding" {
            return match call.args.as_slice() {
                [label] => Ok(Self::Holding(label.clone())),
                _ => Err(SyntaxError {
                    text: s.to_string(),
                    reason: "holding takes one label".into(),
                }),
            };
        }
        s.parse().map(Self::Clause)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct TemplateStep {
    pub skill: SkillCall,
    #[serde(default)]
    pub skip_if: Vec<Condition>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Template {
    pub id: String,
    pub goal: Vec<GoalClause>,
    pub steps: Vec<TemplateStep>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RepairRule {
    pub when: String,
    pub action: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TemplateTable {
    #[serde(rename = "template", default)]
    pub templates: Vec<Template>,
    #[serde(rename = "repair", default)]
    pub repairs: Vec<RepairRule>,
}

impl TemplateTable {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED).expect("bundled templates parse")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Template whose goal clauses equal the task's, as sets.
    pub fn lookup(&self, goal: &[GoalClause]) -> Option<&Template> {
        self.templates
            .iter()
            .find(|t| t.goal.len() == goal.len() && t.goal.iter().all(|c| goal.contains(c)))
    }
}

fn candidates<'a>(b: &'a BeliefGraph, sel: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    b.nodes
        .values()
        .filter(move |n| n.instance_id == sel || n.label == sel)
        .map(|n| n.instance_id.as_str())
}

/// Does the belief assert the clause (hypotheses included, negations not)?
pub fn believed(b: &BeliefGraph, clause: &GoalClause) -> bool {
    let edge = |a: &str, rel: Relation, x: &str| {
        candidates(b, a)
            .any(|s| candidates(b, x).any(|d| b.edges.iter().any(|e| e.src == s && e.relation == rel && e.dst == d)))
    };
    match clause {
        GoalClause::Slot { selector, slot, value } => candidates(b, selector)
            .any(|id| b.node(id).and_then(|n| n.state(slot)).and_then(BeliefValue::concrete) == Some(value.as_str())),
        GoalClause::Contains { container, item } => edge(container, Relation::Contains, item),
        GoalClause::On { supporter, item } => edge(supporter, Relation::Supports, item),
    }
}

fn holds(cond: &Condition, b: &BeliefGraph, agent: &AgentPhysState) -> bool {
    match cond {
        Condition::Clause(c) => believed(b, c),
        Condition::Holding(label) => agent
            .held()
            .any(|id| id == label || b.node(id).is_some_and(|n| n.label == *label)),
    }
}

/// Binds `?x` variables of `pattern` against `text`, argument by argument.
fn unify_call(pattern: &Call, text: &Call) -> Option<Vec<(String, String)>> {
    if pattern.name != text.name || pattern.args.len() != text.args.len() {
        return None;
    }
    let mut binding: Vec<(String, String)> = Vec::new();
    for (p, t) in pattern.args.iter().zip(&text.args) {
        // `key=?v` patterns bind the value part.
        let (pk, pv) = p.split_once('=').map_or((None, p.as_str()), |(k, v)| (Some(k), v));
        let (tk, tv) = t.split_once('=').map_or((None, t.as_str()), |(k, v)| (Some(k), v));
        if pk != tk {
            return None;
        }
        if pv.starts_with('?') {
            match binding.iter().find(|(k, _)| k == pv) {
                Some((_, v)) if v != tv => return None,
                Some(_) => {}
                None => binding.push((pv.to_string(), tv.to_string())),
            }
        } else if pv != tv {
            return None;
        }
    }
    Some(binding)
}

/// The in-process template planner.
#[derive(Debug, Clone)]
pub struct HeuristicPlanner {
    table: TemplateTable,
}

impl Default for HeuristicPlanner {
    fn default() -> Self {
        Self::new(TemplateTable::bundled())
    }
}

impl HeuristicPlanner {
    pub fn new(table: TemplateTable) -> Self {
        Self { table }
    }

    /// Template minus completed and already-satisfied steps; empty when the
    /// belief already satisfies the goal.
    pub fn heuristic_plan(&self, req: &PlanRequest) -> Result<Vec<SkillCall>, PlanError> {
        let template = self.table.lookup(&req.goal.clauses).ok_or(PlanError::NoTemplate)?;
        if req.goal.clauses.iter().all(|c| believed(&req.belief, c)) {
            return Ok(Vec::new());
        }
        let mut done = req.completed.clone();
        let mut plan = Vec::new();
        for step in &template.steps {
            if let Some(i) = done.iter().position(|c| *c == step.skill) {
                done.remove(i);
                continue;
            }
            if step.skip_if.iter().any(|c| holds(c, &req.belief, &req.agent)) {
                continue;
            }
            plan.push(step.skill.clone());
        }
        Ok(plan)
    }
}

impl Planner for HeuristicPlanner {
    fn plan(&mut self, req: &PlanRequest) -> Result<Vec<SkillCall>, PlanError> {
        self.heuristic_plan(req)
    }

    fn repair(&mut self, req: &RepairRequest) -> Result<Option<PrimitiveAction>, PlanError> {
        let inner = req
            .violated
            .strip_prefix("fail(")
            .and_then(|s| s.strip_suffix(')'))
            .unwrap_or(&req.violated);
        let Ok(Violation::Predicate(p)) = inner.parse::<Violation>() else {
            return Ok(None);
        };
        let text = p.to_string();
        if let crate::rules::GroundPredicate::At { object, .. } = &p {
            // Walk to where the belief last saw the object.
            let pos = req
                .belief
                .node(object)
                .and_then(|n| n.state(&Slot::Location))
                .and_then(BeliefValue::concrete);
            return Ok(pos
                .filter(|a| *a != req.agent.current_area)
                .map(|a| PrimitiveAction::new("go_to").with_object(a)));
        }
        let Ok(call) = Call::parse(&text) else {
            return Ok(None);
        };
        for rule in &self.table.repairs {
            let Ok(pattern) = Call::parse(&rule.when) else { continue };
            let Some(binding) = unify_call(&pattern, &call) else {
                continue;
            };
            let mut action = rule.action.clone();
            for (var, value) in &binding {
                action = action.replace(var.as_str(), value);
            }
            return action
                .parse()
                .map(Some)
                .map_err(|e: SyntaxError| PlanError::Malformed(e.to_string()));
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{BeliefMeta, BeliefNode, Source};
    use crate::graph::Edge;
    use crate::task::GoalPredicate;

    fn node(id: &str, label: &str, area: &str, states: &[(&str, &str)]) -> BeliefNode {
        BeliefNode {
            instance_id: id.into(),
            label: label.into(),
            position: Some(BeliefValue::Observed(area.into())),
            states: states
                .iter()
                .map(|(k, v)| (k.to_string(), BeliefValue::Observed(v.to_string())))
                .collect(),
            meta: BeliefMeta {
                source: Source::StateChange,
                confidence: 1.0,
                last_observed_step: Some(0),
            },
        }
    }

    fn coffee_belief() -> BeliefGraph {
        BeliefGraph {
            current_step: 0,
            nodes: [
                node("cup_01", "cup", "coffee_area", &[("state", "empty")]),
                node(
                    "coffee_machine",
                    "coffee_machine",
                    "coffee_area",
                    &[("state", "closed"), ("state.loaded", "false")],
                ),
            ]
            .into_iter()
            .map(|n| (n.instance_id.clone(), n))
            .collect(),
            edges: Default::default(),
        }
    }

    fn request(goal: &[&str], belief: BeliefGraph) -> PlanRequest {
        PlanRequest {
            task_id: "t".into(),
            instruction: String::new(),
            goal: GoalPredicate::parse(goal).unwrap(),
            skills: vec![],
            belief,
            agent: AgentPhysState {
                current_area: "coffee_area".into(),
                left_hand: None,
                right_hand: None,
            },
            completed: vec![],
            violated: None,
            observation: String::new(),
        }
    }

    fn calls(plan: &[SkillCall]) -> Vec<String> {
        plan.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn coffee_goal_gives_canonical_plan() {
        let p = HeuristicPlanner::default();
        let plan = p
            .heuristic_plan(&request(&["contains(cup, brewed_coffee)"], coffee_belief()))
            .unwrap();
        assert_eq!(
            calls(&plan),
            [
                "fetch(capsule)",
                "open(coffee_machine)",
                "insert(capsule, coffee_machine)",
                "place_under(cup, coffee_machine)",
                "turn_on(coffee_machine)",
                "wait(coffee_machine)"
            ]
        );
    }

    #[test]
    fn completed_and_satisfied_steps_are_dropped() {
        let p = HeuristicPlanner::default();
        let mut b = coffee_belief();
        b.nodes
            .get_mut("coffee_machine")
            .unwrap()
            .states
            .insert("state".into(), BeliefValue::Observed("open".into()));
        let mut req = request(&["contains(cup, brewed_coffee)"], b);
        req.completed = vec!["fetch(capsule)".parse().unwrap()];
        let plan = p.heuristic_plan(&req).unwrap();
        assert_eq!(calls(&plan)[0], "insert(capsule, coffee_machine)");
        assert_eq!(plan.len(), 4);
    }

    #[test]
    fn unknown_goal_and_satisfied_goal() {
        let p = HeuristicPlanner::default();
        assert_eq!(
            p.heuristic_plan(&request(&["state(toaster, on)"], coffee_belief())),
            Err(PlanError::NoTemplate)
        );
        let mut b = coffee_belief();
        b.nodes.insert(
            "brewed_coffee_01".into(),
            node("brewed_coffee_01", "brewed_coffee", "coffee_area", &[]),
        );
        b.edges
            .insert(Edge::new("cup_01", Relation::Contains, "brewed_coffee_01"));
        assert_eq!(
            p.heuristic_plan(&request(&["contains(cup, brewed_coffee)"], b)),
            Ok(vec![])
        );
    }

    #[test]
    fn repairs_from_violations() {
        let mut p = HeuristicPlanner::default();
        let base = request(&[], coffee_belief());
        let repair = |p: &mut HeuristicPlanner, violated: &str, area: &str| {
            p.repair(&RepairRequest {
                task_id: "t".into(),
                failed_action: "insert(capsule_01, coffee_machine)".parse().unwrap(),
                violated: violated.into(),
                attempt: 1,
                belief: base.belief.clone(),
                agent: AgentPhysState {
                    current_area: area.into(),
                    ..base.agent.clone()
                },
                observation: String::new(),
            })
            .unwrap()
            .map(|a| a.to_string())
        };
        assert_eq!(
            repair(&mut p, "fail(state(coffee_machine, open))", "coffee_area").as_deref(),
            Some("open(coffee_machine)")
        );
        assert_eq!(
            repair(&mut p, "fail(at(cup_01, sink))", "sink").as_deref(),
            Some("go_to(coffee_area)")
        );
        assert_eq!(repair(&mut p, "fail(at(cup_01, coffee_area))", "coffee_area"), None);
        assert_eq!(repair(&mut p, "fail(hand(any, empty))", "coffee_area"), None);
        assert_eq!(repair(&mut p, "no_rule", "coffee_area"), None);
    }

    #[test]
    fn bundled_table_is_well_formed() {
        let t = TemplateTable::bundled();
        assert!(t.templates.len() >= 8);
        let mut goals: Vec<_> = t.templates.iter().map(|t| t.goal.clone()).collect();
        goals.iter_mut().for_each(|g| g.sort());
        let n = goals.len();
        goals.sort();
        goals.dedup();
        assert_eq!(goals.len(), n, "duplicate goal keys");
    }
}
