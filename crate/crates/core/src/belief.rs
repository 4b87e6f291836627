//! Agent-side belief graph and its two-pass update.
//!
//! The belief graph is built only from observations, feedback and visual
//! reports. It may be incomplete, stale or wrong; nothing here reads the
//! hidden world.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{Digest, Edge, Node, Slot};
use crate::observation::{EdgeChangeKind, Observation};
use crate::rules::{Feedback, GroundPredicate, PrimitiveAction, Violation};
use crate::runtime::oracle::{VisualReport, VISUAL_CONFIDENCE};

/// Observed value, or a tagged hypothesis (`not:<v>` encodes a negation).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BeliefValue {
    Observed(String),
    Hypothesis(String),
}

const HYPOTHESIS_PREFIX: &str = "hypothesis:";
const NEGATION_PREFIX: &str = "not:";

impl BeliefValue {
    pub fn observed(&self) -> Option<&str> {
        match self {
            Self::Observed(v) => Some(v),
            Self::Hypothesis(_) => None,
        }
    }

    pub fn is_hypothesis(&self) -> bool {
        matches!(self, Self::Hypothesis(_))
    }

    /// The concrete value, observed or hypothesized; `None` for negations.
    pub fn concrete(&self) -> Option<&str> {
        match self {
            Self::Observed(v) => Some(v),
            Self::Hypothesis(v) if !v.starts_with(NEGATION_PREFIX) => Some(v),
            Self::Hypothesis(_) => None,
        }
    }

    pub fn negated(&self) -> Option<&str> {
        match self {
            Self::Hypothesis(v) => v.strip_prefix(NEGATION_PREFIX),
            Self::Observed(_) => None,
        }
    }

    pub fn not(value: &str) -> Self {
        Self::Hypothesis(format!("{NEGATION_PREFIX}{value}"))
    }
}

impl fmt::Display for BeliefValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Observed(v) => f.write_str(v),
            Self::Hypothesis(v) => write!(f, "{HYPOTHESIS_PREFIX}{v}"),
        }
    }
}

impl Serialize for BeliefValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BeliefValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.strip_prefix(HYPOTHESIS_PREFIX) {
            Some(v) => Self::Hypothesis(v.to_string()),
            None => Self::Observed(s),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    InitialObservation,
    StateChange,
    ActionFeedback,
    Hypothesis,
    VlmExploration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefMeta {
    pub source: Source,
    pub confidence: f64,
    pub last_observed_step: Option<u64>,
}

impl BeliefMeta {
    fn new(source: Source, confidence: f64, step: u64) -> Self {
        Self {
            source,
            confidence,
            last_observed_step: Some(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefNode {
    pub instance_id: String,
    pub label: String,
    /// Believed area; `None` when unknown.
    pub position: Option<BeliefValue>,
    /// Keyed by slot name (`state`, `state.<key>`, `amount`).
    pub states: BTreeMap<String, BeliefValue>,
    pub meta: BeliefMeta,
}

impl BeliefNode {
    fn from_world_node(n: &Node, meta: BeliefMeta) -> Self {
        let mut node = Self {
            instance_id: n.instance_id.clone(),
            label: n.label.clone(),
            position: None,
            states: BTreeMap::new(),
            meta,
        };
        node.overwrite_from(n);
        node
    }

    fn overwrite_from(&mut self, n: &Node) {
        self.position = n.location.clone().map(BeliefValue::Observed);
        self.states = n
            .slots()
            .into_iter()
            .filter(|(s, _)| *s != Slot::Location)
            .map(|(s, v)| (s.to_string(), BeliefValue::Observed(v)))
            .collect();
    }

    pub fn state(&self, slot: &Slot) -> Option<&BeliefValue> {
        if *slot == Slot::Location {
            return self.position.as_ref();
        }
        self.states.get(&slot.to_string())
    }

    fn stamp(&mut self, meta: BeliefMeta) {
        let last = match (self.meta.last_observed_step, meta.last_observed_step) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.meta = BeliefMeta {
            last_observed_step: last,
            ..meta
        };
    }
}

/// Tunables for the update operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefParams {
    pub rho_absent: f64,
    pub rho_fail: f64,
    pub stale_steps: u64,
}

impl Default for BeliefParams {
    fn default() -> Self {
        Self {
            rho_absent: 0.5,
            rho_fail: 0.3,
            stale_steps: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BeliefError {
    #[error("feedback `{0}` does not map to a known belief slot")]
    UnparsableFeedback(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MemoryMode {
    /// Keep everything across tasks.
    Full,
    /// Keep only what is believed to be in the current area.
    None,
    /// Cap the node count, then forget non-local nodes at `rate`.
    Bounded { cap: usize, rate: f64 },
}

impl MemoryMode {
    pub fn bounded_default() -> Self {
        Self::Bounded { cap: 20, rate: 0.1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefGraph {
    pub current_step: u64,
    #[serde(with = "node_list")]
    pub nodes: BTreeMap<String, BeliefNode>,
    pub edges: BTreeSet<Edge>,
}

mod node_list {
    use super::BeliefNode;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, BeliefNode>, s: S) -> Result<S::Ok, S::Error> {
        m.values().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, BeliefNode>, D::Error> {
        let v = Vec::<BeliefNode>::deserialize(d)?;
        Ok(v.into_iter().map(|n| (n.instance_id.clone(), n)).collect())
    }
}

impl BeliefGraph {
    /// One node per visible object, stamped `(initial_observation, 1.0, step)`.
    pub fn init_from_observation(obs: &Observation) -> Self {
        let mut b = Self {
            current_step: obs.step,
            ..Self::default()
        };
        let view = obs.current_view();
        for n in view.objects() {
            b.nodes.insert(
                n.instance_id.clone(),
                BeliefNode::from_world_node(n, BeliefMeta::new(Source::InitialObservation, 1.0, obs.step)),
            );
        }
        b.edges = view.edges;
        b
    }

    pub fn node(&self, id: &str) -> Option<&BeliefNode> {
        self.nodes.get(id)
    }

    pub fn digest(&self) -> Digest {
        Digest::of_json(self)
    }

    /// Nodes believed (observed or hypothesized) to be in `area`.
    pub fn in_area<'a>(&'a self, area: &'a str) -> impl Iterator<Item = &'a BeliefNode> + 'a {
        self.nodes
            .values()
            .filter(move |n| n.position.as_ref().and_then(BeliefValue::concrete) == Some(area))
    }

    /// One belief update: observation pass, then feedback pass.
    ///
    /// An unmappable failure still updates the belief (the exercised nodes are
    /// marked as hypotheses); the error is returned alongside for logging.
    pub fn update(
        &self,
        obs: &Observation,
        action: &PrimitiveAction,
        fb: &Feedback,
        params: &BeliefParams,
    ) -> (BeliefGraph, Option<BeliefError>) {
        let mut b = self.clone();
        let t = obs.step;
        b.current_step = b.current_step.max(t);
        b.observation_pass(obs, params);
        let err = b.feedback_pass(action, fb, t, params);
        (b, err)
    }

    fn observation_pass(&mut self, obs: &Observation, params: &BeliefParams) {
        let t = obs.step;
        let view = obs.current_view();
        for change in &obs.delta_set.changed_attrs {
            let id = &change.instance_id;
            match self.nodes.get_mut(id) {
                Some(node) => {
                    if change.slot == Slot::Location {
                        node.position = change.new.clone().map(BeliefValue::Observed);
                    } else {
                        match &change.new {
                            Some(v) => {
                                node.states
                                    .insert(change.slot.to_string(), BeliefValue::Observed(v.clone()));
                            }
                            None => {
                                node.states.remove(&change.slot.to_string());
                            }
                        }
                    }
                    node.stamp(BeliefMeta::new(Source::StateChange, 1.0, t));
                }
                None => {
                    if let Some(n) = view.nodes.get(id) {
                        self.nodes.insert(
                            id.clone(),
                            BeliefNode::from_world_node(n, BeliefMeta::new(Source::StateChange, 1.0, t)),
                        );
                    }
                }
            }
        }
        for n in &obs.delta_set.appeared {
            let meta = BeliefMeta::new(Source::StateChange, 1.0, t);
            match self.nodes.get_mut(&n.instance_id) {
                Some(node) => {
                    node.overwrite_from(n);
                    node.stamp(meta);
                }
                None => {
                    self.nodes
                        .insert(n.instance_id.clone(), BeliefNode::from_world_node(n, meta));
                }
            }
        }
        for id in &obs.delta_set.disappeared {
            // Retained: the object may be in an unvisited area.
            if let Some(node) = self.nodes.get_mut(id) {
                node.meta.confidence = node.meta.confidence.min(params.rho_absent);
                node.meta.last_observed_step = Some(node.meta.last_observed_step.map_or(t, |s| s.max(t)));
            }
        }
        for c in &obs.delta_set.edge_changes {
            match c.change {
                EdgeChangeKind::Added => self.edges.insert(c.edge.clone()),
                EdgeChangeKind::Removed => self.edges.remove(&c.edge),
            };
        }
        // A change that reverts drops out of the since-start delta; reconcile
        // visible nodes and edges with the current view so it is not missed.
        for n in view.objects() {
            let meta = BeliefMeta::new(Source::StateChange, 1.0, t);
            match self.nodes.get_mut(&n.instance_id) {
                Some(node) => {
                    let mut fresh = node.clone();
                    fresh.overwrite_from(n);
                    if fresh.position != node.position || fresh.states != node.states {
                        *node = fresh;
                        node.stamp(meta);
                    }
                }
                None => {
                    self.nodes
                        .insert(n.instance_id.clone(), BeliefNode::from_world_node(n, meta));
                }
            }
        }
        self.edges.retain(|e| {
            !(view.nodes.contains_key(&e.src) && view.nodes.contains_key(&e.dst)) || view.edges.contains(e)
        });
        self.edges.extend(view.edges.iter().cloned());
    }

    fn feedback_pass(
        &mut self,
        action: &PrimitiveAction,
        fb: &Feedback,
        t: u64,
        params: &BeliefParams,
    ) -> Option<BeliefError> {
        let exercised: Vec<&str> = action.args().filter(|a| self.nodes.contains_key(*a)).collect();
        match fb {
            Feedback::Success => {
                for id in exercised {
                    if let Some(n) = self.nodes.get_mut(id) {
                        n.meta.confidence = 1.0;
                    }
                }
                None
            }
            Feedback::NoRule => None,
            Feedback::Fail { violated } => {
                let meta = BeliefMeta::new(Source::ActionFeedback, params.rho_fail, t);
                let mapped = match violated {
                    Violation::Predicate(p) => self.apply_contradiction(p, &meta),
                    Violation::Integrity(_) => false,
                };
                if mapped {
                    return None;
                }
                let exercised: Vec<String> = exercised.into_iter().map(str::to_string).collect();
                for id in exercised {
                    if let Some(n) = self.nodes.get_mut(&id) {
                        n.stamp(BeliefMeta {
                            source: Source::Hypothesis,
                            ..meta.clone()
                        });
                    }
                }
                Some(BeliefError::UnparsableFeedback(violated.to_string()))
            }
        }
    }

    /// Belief nodes a predicate subject refers to: the instance if known,
    /// else every node with that label.
    fn resolve_subject(&self, subject: &str) -> Vec<String> {
        if self.nodes.contains_key(subject) {
            return vec![subject.to_string()];
        }
        self.nodes
            .values()
            .filter(|n| n.label == subject)
            .map(|n| n.instance_id.clone())
            .collect()
    }

    /// Rewrites the contradicted attribute to the negation of the violated
    /// predicate. Returns false when nothing in the belief maps to it.
    fn apply_contradiction(&mut self, p: &GroundPredicate, meta: &BeliefMeta) -> bool {
        type Write = Box<dyn Fn(&mut BeliefNode)>;
        let (ids, write): (Vec<String>, Write) = match p {
            GroundPredicate::At { object, area } => {
                let area = area.clone();
                (
                    self.resolve_subject(object),
                    Box::new(move |n: &mut BeliefNode| n.position = Some(BeliefValue::not(&area))),
                )
            }
            GroundPredicate::State { object, slot, value } => {
                let (key, value) = (slot.to_string(), value.clone());
                (
                    self.resolve_subject(object),
                    Box::new(move |n: &mut BeliefNode| {
                        n.states.insert(key.clone(), BeliefValue::not(&value));
                    }),
                )
            }
            GroundPredicate::Contains { container, item } => {
                let edge = Edge::new(container.clone(), crate::graph::Relation::Contains, item.clone());
                self.edges.remove(&edge);
                (self.resolve_subject(item), Box::new(|_: &mut BeliefNode| {}))
            }
            GroundPredicate::Hand { content: Some(x), .. } => {
                (self.resolve_subject(x), Box::new(|_: &mut BeliefNode| {}))
            }
            GroundPredicate::Hand { content: None, .. } | GroundPredicate::AgentAt { .. } => {
                (Vec::new(), Box::new(|_: &mut BeliefNode| {}))
            }
        };
        for id in &ids {
            let n = self.nodes.get_mut(id).expect("resolved from belief");
            write(n);
            n.stamp(meta.clone());
        }
        !ids.is_empty()
    }

    /// Integrates an area's anchor content when the agent arrives there:
    /// unknown objects are added, known ones are confirmed in place.
    pub fn revisit(&self, obs: &Observation) -> BeliefGraph {
        let mut b = self.clone();
        let t = obs.step;
        b.current_step = b.current_step.max(t);
        let view = obs.current_view();
        let appeared: BTreeSet<&str> = obs.delta_set.appeared.iter().map(|n| n.instance_id.as_str()).collect();
        for n in view.objects() {
            let source = if appeared.contains(n.instance_id.as_str()) {
                Source::StateChange
            } else {
                Source::InitialObservation
            };
            match b.nodes.get_mut(&n.instance_id) {
                Some(node) => {
                    node.overwrite_from(n);
                    let source = node.meta.source;
                    node.stamp(BeliefMeta::new(source, 1.0, t));
                }
                None => {
                    b.nodes.insert(
                        n.instance_id.clone(),
                        BeliefNode::from_world_node(n, BeliefMeta::new(source, 1.0, t)),
                    );
                }
            }
        }
        b.edges
            .retain(|e| !(view.nodes.contains_key(&e.src) && view.nodes.contains_key(&e.dst)));
        b.edges.extend(view.edges.iter().cloned());
        b
    }

    /// Ids with `current_step - last_observed_step > stale_steps`; nodes with
    /// no observation stamp are always stale. Nothing is removed.
    pub fn flag_stale(&self, stale_steps: u64) -> BTreeSet<String> {
        self.nodes
            .values()
            .filter(|n| match n.meta.last_observed_step {
                None => true,
                Some(s) => self.current_step.saturating_sub(s) > stale_steps,
            })
            .map(|n| n.instance_id.clone())
            .collect()
    }

    /// Every reported object is written with `(vlm_exploration, 0.85, step)`.
    pub fn integrate_visual_report(&self, report: &VisualReport, step: u64) -> BeliefGraph {
        let mut b = self.clone();
        b.current_step = b.current_step.max(step);
        for e in &report.entries {
            let meta = BeliefMeta::new(Source::VlmExploration, VISUAL_CONFIDENCE, step);
            let node = b.nodes.entry(e.instance_id.clone()).or_insert_with(|| BeliefNode {
                instance_id: e.instance_id.clone(),
                label: e.label.clone(),
                position: None,
                states: BTreeMap::new(),
                meta: meta.clone(),
            });
            node.position = Some(BeliefValue::Observed(report.area.clone()));
            for (k, v) in &e.states {
                node.states.insert(k.clone(), BeliefValue::Observed(v.clone()));
            }
            node.meta = BeliefMeta {
                last_observed_step: Some(node.meta.last_observed_step.map_or(step, |s| s.max(step))),
                ..meta
            };
            if let Some(parent) = &e.inside {
                if b.nodes.contains_key(parent) {
                    b.edges.insert(Edge::new(
                        parent.clone(),
                        crate::graph::Relation::Contains,
                        e.instance_id.clone(),
                    ));
                }
            }
        }
        b
    }

    /// Task-boundary memory policy. Only `Bounded` consumes randomness.
    pub fn apply_forgetting<R: Rng>(&self, mode: &MemoryMode, current_area: &str, rng: &mut R) -> BeliefGraph {
        let mut b = self.clone();
        let local = |n: &BeliefNode| n.position.as_ref().and_then(BeliefValue::concrete) == Some(current_area);
        match *mode {
            MemoryMode::Full => {}
            MemoryMode::None => b.nodes.retain(|_, n| local(n)),
            MemoryMode::Bounded { cap, rate } => {
                if b.nodes.len() > cap {
                    let mut order: Vec<(f64, Option<u64>, String)> = b
                        .nodes
                        .values()
                        .map(|n| (n.meta.confidence, n.meta.last_observed_step, n.instance_id.clone()))
                        .collect();
                    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                    let excess = b.nodes.len() - cap;
                    for (_, _, id) in order.into_iter().take(excess) {
                        b.nodes.remove(&id);
                    }
                }
                let ids: Vec<String> = b.nodes.keys().cloned().collect();
                for id in ids {
                    let is_local = local(&b.nodes[&id]);
                    // Draw for every node so the RNG stream does not depend on locality.
                    let drop = rng.gen_bool(rate.clamp(0.0, 1.0));
                    if drop && !is_local {
                        b.nodes.remove(&id);
                    }
                }
            }
        }
        let keep: BTreeSet<&String> = b.nodes.keys().collect();
        let edges = b
            .edges
            .iter()
            .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
            .cloned()
            .collect();
        b.edges = edges;
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ScenarioInit, WorldGraph};
    use crate::observation::observe;
    use crate::rules::{execute_in_place, RuleBase, WorldRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> WorldGraph {
        WorldGraph::instantiate(&ScenarioInit {
            areas: vec!["coffee_area".into(), "storage_cabinet".into(), "sink".into()],
            nodes: vec![
                Node::object("coffee_machine", "coffee_machine", "coffee_area")
                    .with_state("closed")
                    .with_flag("loaded", "false"),
                Node::object("cup_01", "cup", "coffee_area").with_state("empty"),
                Node::object("capsule_01", "capsule", "storage_cabinet"),
                Node::object("capsule_02", "capsule", "storage_cabinet"),
            ],
            edges: vec![],
            agent_start: "coffee_area".into(),
            image_refs: Default::default(),
        })
        .unwrap()
    }

    fn rules() -> RuleBase {
        RuleBase::new(vec![
            WorldRule::from_text("open", "t", "open(?x)", &["state(?x, closed)"], &["set(?x, open)"]).unwrap(),
            WorldRule::from_text("go", "t", "go_to(?a:area)", &[], &["move_agent(?a)"]).unwrap(),
            WorldRule::from_text(
                "pick",
                "t",
                "pick_up(?o)",
                &["at(?o, here)"],
                &["detach(?o)", "grab(?o)"],
            )
            .unwrap(),
            WorldRule::from_text(
                "insert",
                "t",
                "insert(?c:capsule, ?m:coffee_machine)",
                &["at(?c, here)", "state(?m, open)"],
                &["set(?m, loaded=true)"],
            )
            .unwrap(),
        ])
    }

    fn act(s: &str) -> PrimitiveAction {
        s.parse().unwrap()
    }

    fn step(init: &WorldGraph, g: &mut WorldGraph, a: &str, t: u64) -> (Observation, Feedback) {
        let fb = execute_in_place(g, &rules(), &act(a)).feedback;
        let mut obs = observe(init, g, &g.agent().current_area.clone(), "img").unwrap();
        obs.step = t;
        (obs, fb)
    }

    #[test]
    fn init_has_visible_objects_only() {
        let g = world();
        let obs = observe(&g, &g, "coffee_area", "img").unwrap();
        let b = BeliefGraph::init_from_observation(&obs);
        let ids: Vec<&str> = b.nodes.keys().map(String::as_str).collect();
        assert_eq!(ids, ["coffee_machine", "cup_01"]);
        for n in b.nodes.values() {
            assert_eq!(n.meta, BeliefMeta::new(Source::InitialObservation, 1.0, 0));
        }
        let empty = observe(&g, &g, "sink", "img").unwrap();
        assert!(BeliefGraph::init_from_observation(&empty).nodes.is_empty());
    }

    #[test]
    fn state_change_overwrites_with_full_confidence() {
        let init = world();
        let mut g = init.clone();
        let b0 = BeliefGraph::init_from_observation(&observe(&init, &init, "coffee_area", "img").unwrap());
        let (obs, fb) = step(&init, &mut g, "open(coffee_machine)", 1);
        let (b1, err) = b0.update(&obs, &act("open(coffee_machine)"), &fb, &BeliefParams::default());
        assert!(err.is_none());
        let m = b1.node("coffee_machine").unwrap();
        assert_eq!(m.states["state"], BeliefValue::Observed("open".into()));
        assert_eq!(m.meta, BeliefMeta::new(Source::StateChange, 1.0, 1));
    }

    #[test]
    fn failure_writes_negated_hypothesis() {
        let init = world();
        let mut g = init.clone();
        // Belief wrongly places the capsule in the coffee area.
        let mut b = BeliefGraph::init_from_observation(&observe(&init, &init, "coffee_area", "img").unwrap());
        b = b.integrate_visual_report(
            &VisualReport {
                area: "coffee_area".into(),
                entries: vec![crate::runtime::oracle::ReportEntry {
                    instance_id: "capsule_01".into(),
                    label: "capsule".into(),
                    inside: None,
                    states: BTreeMap::new(),
                }],
            },
            0,
        );
        execute_in_place(&mut g, &rules(), &act("open(coffee_machine)"));
        let (obs, fb) = step(&init, &mut g, "insert(capsule_01, coffee_machine)", 2);
        assert_eq!(fb.to_string(), "fail(at(capsule_01, coffee_area))");
        let params = BeliefParams::default();
        let (b2, err) = b.update(&obs, &act("insert(capsule_01, coffee_machine)"), &fb, &params);
        assert!(err.is_none());
        let c = b2.node("capsule_01").unwrap();
        assert_eq!(c.position, Some(BeliefValue::not("coffee_area")));
        assert_eq!(c.meta, BeliefMeta::new(Source::ActionFeedback, params.rho_fail, 2));
    }

    #[test]
    fn success_with_empty_delta_only_touches_exercised_nodes() {
        let init = world();
        let mut b = BeliefGraph::init_from_observation(&observe(&init, &init, "coffee_area", "img").unwrap());
        b.nodes.get_mut("cup_01").unwrap().meta.confidence = 0.4;
        b.nodes.get_mut("coffee_machine").unwrap().meta.confidence = 0.7;
        let obs = observe(&init, &init, "coffee_area", "img").unwrap();
        let (b2, _) = b.update(&obs, &act("wash(cup_01)"), &Feedback::Success, &BeliefParams::default());
        assert_eq!(b2.node("cup_01").unwrap().meta.confidence, 1.0);
        assert_eq!(b2.node("coffee_machine").unwrap(), b.node("coffee_machine").unwrap());
    }

    #[test]
    fn disappearance_keeps_node_with_reduced_confidence() {
        let init = world();
        let mut g = init.clone();
        let b0 = BeliefGraph::init_from_observation(&observe(&init, &init, "coffee_area", "img").unwrap());
        execute_in_place(&mut g, &rules(), &act("pick_up(cup_01)"));
        execute_in_place(&mut g, &rules(), &act("go_to(sink)"));
        execute_in_place(&mut g, &rules(), &act("pick_up(cup_01)"));
        // Cup left behind in the sink area; back at the coffee area it is gone.
        let mut g2 = init.clone();
        for a in ["pick_up(cup_01)", "go_to(sink)"] {
            execute_in_place(&mut g2, &rules(), &act(a));
        }
        let mut obs = observe(&init, &g2, "coffee_area", "img").unwrap();
        obs.step = 5;
        let (b1, _) = b0.update(&obs, &act("look()"), &Feedback::NoRule, &BeliefParams::default());
        let cup = b1.node("cup_01").unwrap();
        assert_eq!(cup.meta.confidence, 0.5);
        assert_eq!(cup.meta.last_observed_step, Some(5));
    }

    #[test]
    fn unparsable_feedback_marks_hypothesis() {
        let init = world();
        let b = BeliefGraph::init_from_observation(&observe(&init, &init, "coffee_area", "img").unwrap());
        let obs = observe(&init, &init, "coffee_area", "img").unwrap();
        let fb = Feedback::Fail {
            violated: Violation::Predicate("agent_at(sink)".parse().unwrap()),
        };
        let (b2, err) = b.update(&obs, &act("wash(cup_01)"), &fb, &BeliefParams::default());
        assert!(matches!(err, Some(BeliefError::UnparsableFeedback(_))));
        assert_eq!(b2.node("cup_01").unwrap().meta.source, Source::Hypothesis);
    }

    #[test]
    fn staleness_boundaries() {
        let mut b = BeliefGraph::default();
        let node = |id: &str, step: Option<u64>| BeliefNode {
            instance_id: id.into(),
            label: "x".into(),
            position: None,
            states: BTreeMap::new(),
            meta: BeliefMeta {
                source: Source::Hypothesis,
                confidence: 0.4,
                last_observed_step: step,
            },
        };
        b.current_step = 11;
        b.nodes.insert("now".into(), node("now", Some(11)));
        b.nodes.insert("edge".into(), node("edge", Some(1)));
        b.nodes.insert("old".into(), node("old", Some(0)));
        b.nodes.insert("never".into(), node("never", None));
        let stale = b.flag_stale(10);
        assert_eq!(stale.into_iter().collect::<Vec<_>>(), ["never", "old"]);
        assert_eq!(b.nodes.len(), 4);
    }

    #[test]
    fn visual_report_integration() {
        let g = world();
        let b = BeliefGraph::init_from_observation(&observe(&g, &g, "coffee_area", "img").unwrap());
        let report = crate::runtime::oracle::visual_oracle_query(&g, "storage_cabinet").unwrap();
        let b2 = b.integrate_visual_report(&report, 3);
        let c = b2.node("capsule_01").unwrap();
        assert_eq!(c.position, Some(BeliefValue::Observed("storage_cabinet".into())));
        assert_eq!(c.meta, BeliefMeta::new(Source::VlmExploration, 0.85, 3));
        let empty = VisualReport {
            area: "sink".into(),
            entries: vec![],
        };
        assert_eq!(b.integrate_visual_report(&empty, 0), b);
    }

    #[test]
    fn forgetting_modes() {
        let mut b = BeliefGraph::default();
        for i in 0..25 {
            let area = if i < 5 { "here" } else { "there" };
            b.nodes.insert(
                format!("n{i:02}"),
                BeliefNode {
                    instance_id: format!("n{i:02}"),
                    label: "thing".into(),
                    position: Some(BeliefValue::Observed(area.into())),
                    states: BTreeMap::new(),
                    meta: BeliefMeta::new(Source::StateChange, 1.0 - i as f64 / 100.0, i),
                },
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(b.apply_forgetting(&MemoryMode::Full, "here", &mut rng), b);
        let none = b.apply_forgetting(&MemoryMode::None, "here", &mut rng);
        assert_eq!(none.nodes.len(), 5);
        let capped = b.apply_forgetting(&MemoryMode::Bounded { cap: 20, rate: 0.0 }, "here", &mut rng);
        assert_eq!(capped.nodes.len(), 20);
        // Lowest confidence goes first.
        assert!(!capped.nodes.contains_key("n24"));
        let a = b.apply_forgetting(
            &MemoryMode::bounded_default(),
            "here",
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let c = b.apply_forgetting(
            &MemoryMode::bounded_default(),
            "here",
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(a, c);
        assert!(a.nodes.len() <= 20);
    }

    #[test]
    fn belief_serialization_matches_node_schema() {
        let g = world();
        let b = BeliefGraph::init_from_observation(&observe(&g, &g, "coffee_area", "img").unwrap());
        let v = serde_json::to_value(&b).unwrap();
        let cup = &v["nodes"][1];
        assert_eq!(cup["instance_id"], "cup_01");
        assert_eq!(cup["label"], "cup");
        assert_eq!(cup["position"], "coffee_area");
        assert_eq!(cup["states"]["state"], "empty");
        assert_eq!(cup["meta"]["source"], "initial_observation");
        assert_eq!(cup["meta"]["confidence"], 1.0);
        assert_eq!(cup["meta"]["last_observed_step"], 0);
        let back: BeliefGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, b);
    }
}
