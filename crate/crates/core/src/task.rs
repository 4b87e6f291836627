//! Execution hierarchy: skills expand to primitives, tasks carry goals, and
//! episodes chain tasks over one world without reset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::belief::{BeliefGraph, MemoryMode};
use crate::graph::{Relation, Slot, WorldGraph};
use crate::rules::{ActionPattern, Binding, PrimitiveAction, Term};
use crate::syntax::{Call, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill `{skill}` takes {expected} argument(s), got {got}")]
    Arity { skill: String, expected: usize, got: usize },
    #[error("skill `{skill}` leaves `?{var}` unbound")]
    UnboundSkillVariable { skill: String, var: String },
    #[error("goal references unknown label `{0}`")]
    UnknownLabel(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Center action plus contextual setup/cleanup, over the skill's parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skill {
    pub skill_id: String,
    pub source: String,
    /// `skill_id(?a:label, ?b)`: parameter order for calls.
    pub signature: ActionPattern,
    pub center: ActionPattern,
    pub pre_context: Vec<ActionPattern>,
    pub post_context: Vec<ActionPattern>,
}

impl Skill {
    pub fn from_text(
        signature: &str,
        source: &str,
        center: &str,
        pre: &[&str],
        post: &[&str],
    ) -> Result<Self, SyntaxError> {
        let signature = ActionPattern::parse(signature)?;
        Ok(Self {
            skill_id: signature.action_type.clone(),
            source: source.to_string(),
            signature,
            center: ActionPattern::parse(center)?,
            pre_context: pre.iter().map(|p| ActionPattern::parse(p)).collect::<Result<_, _>>()?,
            post_context: post.iter().map(|p| ActionPattern::parse(p)).collect::<Result<_, _>>()?,
        })
    }

    /// Built-in navigation skill: `navigate_to(?a:area)` → `go_to(?a)`.
    pub fn navigate_to() -> Self {
        Self::from_text("navigate_to(?a:area)", "builtin", "go_to(?a)", &[], &[]).expect("static")
    }

    /// Parameters in call order, with their label constraints.
    pub fn params(&self) -> Vec<(&str, Option<&str>)> {
        [&self.signature.object, &self.signature.target]
            .into_iter()
            .flatten()
            .filter_map(|t| match t {
                Term::Var { name, label } => Some((name.as_str(), label.as_deref())),
                _ => None,
            })
            .collect()
    }

    /// Substitutes call arguments into every action of the skill.
    pub fn ground(&self, args: &[String]) -> Result<GroundSkill, TaskError> {
        let params = self.params();
        if params.len() != args.len() {
            return Err(TaskError::Arity {
                skill: self.skill_id.clone(),
                expected: params.len(),
                got: args.len(),
            });
        }
        let binding: Binding = params
            .iter()
            .zip(args)
            .map(|((name, _), a)| (name.to_string(), a.clone()))
            .collect();
        let g = |p: &ActionPattern| self.ground_pattern(p, &binding);
        Ok(GroundSkill {
            skill_id: self.skill_id.clone(),
            center: g(&self.center)?,
            pre_context: self.pre_context.iter().map(g).collect::<Result<_, _>>()?,
            post_context: self.post_context.iter().map(g).collect::<Result<_, _>>()?,
        })
    }

    fn ground_pattern(&self, p: &ActionPattern, binding: &Binding) -> Result<PrimitiveAction, TaskError> {
        let resolve = |t: &Option<Term>| -> Result<Option<String>, TaskError> {
            match t {
                None => Ok(None),
                Some(Term::Lit(l)) => Ok(Some(l.clone())),
                Some(Term::Here) => Ok(Some("here".into())),
                Some(Term::Var { name, .. }) => {
                    binding
                        .get(name)
                        .cloned()
                        .map(Some)
                        .ok_or_else(|| TaskError::UnboundSkillVariable {
                            skill: self.skill_id.clone(),
                            var: name.clone(),
                        })
                }
            }
        };
        Ok(PrimitiveAction {
            action_type: p.action_type.clone(),
            object: resolve(&p.object)?,
            target: resolve(&p.target)?,
        })
    }
}

/// A skill with concrete arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundSkill {
    pub skill_id: String,
    pub center: PrimitiveAction,
    pub pre_context: Vec<PrimitiveAction>,
    pub post_context: Vec<PrimitiveAction>,
}

/// `pre_context ++ [center] ++ post_context`.
pub fn expand_skill(s: &GroundSkill) -> Vec<PrimitiveAction> {
    let mut out = s.pre_context.clone();
    out.push(s.center.clone());
    out.extend(s.post_context.iter().cloned());
    out
}

/// A skill invocation as written by a planner: arguments are instance ids or labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SkillCall {
    pub skill_id: String,
    pub args: Vec<String>,
}

impl SkillCall {
    pub fn new(skill_id: impl Into<String>, args: &[&str]) -> Self {
        Self {
            skill_id: skill_id.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for SkillCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.skill_id, self.args.join(", "))
    }
}

impl FromStr for SkillCall {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        if call.args.iter().any(|a| a.contains('=') || a.starts_with('?')) {
            return Err(SyntaxError {
                text: s.to_string(),
                reason: "skill arguments must be instance ids or labels".into(),
            });
        }
        Ok(Self {
            skill_id: call.name,
            args: call.args,
        })
    }
}

impl Serialize for SkillCall {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SkillCall {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One goal conjunct. Selectors are instance ids or labels (existential).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalClause {
    /// `state(sel, v)`, `state(sel, key=v)`, `state(sel, amount=full)`, `at(sel, area)`
    Slot {
        selector: String,
        slot: Slot,
        value: String,
    },
    /// `contains(container, item)`
    Contains { container: String, item: String },
    /// `on(supporter, item)`
    On { supporter: String, item: String },
}

impl GoalClause {
    pub fn selectors(&self) -> Vec<&str> {
        match self {
            Self::Slot { selector, .. } => vec![selector],
            Self::Contains { container: a, item: b } | Self::On { supporter: a, item: b } => vec![a, b],
        }
    }

    pub fn holds(&self, g: &WorldGraph) -> bool {
        let matches = |sel: &str| -> Vec<&str> {
            match g.lookup_instance(sel) {
                Some(n) => vec![n.instance_id.as_str()],
                None => g
                    .nodes()
                    .filter(|n| n.label == sel)
                    .map(|n| n.instance_id.as_str())
                    .collect(),
            }
        };
        match self {
            Self::Slot { selector, slot, value } => matches(selector)
                .into_iter()
                .any(|id| g.slot_value(id, slot).as_deref() == Some(value.as_str())),
            Self::Contains { container, item } => pair(g, &matches(container), &matches(item), Relation::Contains),
            Self::On { supporter, item } => pair(g, &matches(supporter), &matches(item), Relation::Supports),
        }
    }
}

fn pair(g: &WorldGraph, srcs: &[&str], dsts: &[&str], rel: Relation) -> bool {
    srcs.iter().any(|s| dsts.iter().any(|d| g.has_edge(s, rel, d)))
}

impl fmt::Display for GoalClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Slot {
                selector,
                slot: Slot::Location,
                value,
            } => write!(f, "at({selector}, {value})"),
            Self::Slot {
                selector,
                slot: Slot::State,
                value,
            } => write!(f, "state({selector}, {value})"),
            Self::Slot {
                selector,
                slot: Slot::Amount,
                value,
            } => write!(f, "state({selector}, amount={value})"),
            Self::Slot {
                selector,
                slot: Slot::Flag(k),
                value,
            } => write!(f, "state({selector}, {k}={value})"),
            Self::Contains { container, item } => write!(f, "contains({container}, {item})"),
            Self::On { supporter, item } => write!(f, "on({supporter}, {item})"),
        }
    }
}

impl FromStr for GoalClause {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        let bad = |reason: &str| SyntaxError {
            text: s.to_string(),
            reason: reason.to_string(),
        };
        let a = &call.args;
        if a.iter().any(|x| x.starts_with('?')) {
            return Err(bad("goal clauses take no variables"));
        }
        if a.len() != 2 {
            return Err(bad("goal clauses take two arguments"));
        }
        if a[0].contains('=') {
            return Err(bad("first argument must be a selector"));
        }
        match call.name.as_str() {
            "at" => Ok(Self::Slot {
                selector: a[0].clone(),
                slot: Slot::Location,
                value: a[1].clone(),
            }),
            "state" => {
                let (slot, value) = match a[1].split_once('=') {
                    Some((k, v)) => (Slot::from_key(k), v.to_string()),
                    None => (Slot::State, a[1].clone()),
                };
                Ok(Self::Slot {
                    selector: a[0].clone(),
                    slot,
                    value,
                })
            }
            "contains" | "on" if a[1].contains('=') => Err(bad("relation clauses take two selectors")),
            "contains" => Ok(Self::Contains {
                container: a[0].clone(),
                item: a[1].clone(),
            }),
            "on" => Ok(Self::On {
                supporter: a[0].clone(),
                item: a[1].clone(),
            }),
            other => Err(bad(&format!("unknown goal clause `{other}`"))),
        }
    }
}

impl Serialize for GoalClause {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GoalClause {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Conjunction of clauses; empty means vacuously true.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalPredicate {
    pub clauses: Vec<GoalClause>,
}

impl GoalPredicate {
    pub fn parse(clauses: &[&str]) -> Result<Self, SyntaxError> {
        Ok(Self {
            clauses: clauses.iter().map(|c| c.parse()).collect::<Result<_, _>>()?,
        })
    }

    pub fn holds(&self, g: &WorldGraph) -> bool {
        self.clauses.iter().all(|c| c.holds(g))
    }

    pub fn selectors(&self) -> BTreeSet<&str> {
        self.clauses.iter().flat_map(GoalClause::selectors).collect()
    }
}

/// Goal check against a snapshot; `vocabulary` is every id, label and area
/// the scenario can ever produce.
pub fn check_goal(goal: &GoalPredicate, g: &WorldGraph, vocabulary: &BTreeSet<String>) -> Result<bool, TaskError> {
    for sel in goal.selectors() {
        if !vocabulary.contains(sel) {
            return Err(TaskError::UnknownLabel(sel.to_string()));
        }
    }
    Ok(goal.holds(g))
}

/// `(action_type, object label)` pair scored by TCR.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KeyAction {
    pub action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_label: Option<String>,
}

impl KeyAction {
    /// Key of an executed primitive, resolving its object's label in `g`.
    pub fn of(action: &PrimitiveAction, g: &WorldGraph) -> Self {
        Self {
            action_type: action.action_type.clone(),
            object_label: action.object.as_ref().map(|o| match g.lookup_instance(o) {
                Some(n) if !g.is_area(o) => n.label.clone(),
                _ => o.clone(),
            }),
        }
    }
}

impl fmt::Display for KeyAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.object_label {
            Some(l) => write!(f, "{}({l})", self.action_type),
            None => write!(f, "{}()", self.action_type),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub instruction: String,
    pub goal: GoalPredicate,
    pub key_actions: Vec<KeyAction>,
    /// Ground-truth skill calls, as authored.
    pub gt_skills: Vec<SkillCall>,
}

/// Where an episode stands after a task finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextTask {
    Task(usize),
    EpisodeDone,
}

/// Mutable state of a running episode: one world shared by all tasks.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub world: WorldGraph,
    pub position: usize,
    pub task_count: usize,
    pub belief: Option<BeliefGraph>,
}

impl EpisodeState {
    pub fn new(world: WorldGraph, task_count: usize) -> Self {
        Self {
            world,
            position: 0,
            task_count,
            belief: None,
        }
    }

    pub fn current(&self) -> NextTask {
        if self.position < self.task_count {
            NextTask::Task(self.position)
        } else {
            NextTask::EpisodeDone
        }
    }

    /// Moves to the next task. The world is carried forward untouched,
    /// whatever the outcome of the previous task; the belief passes through
    /// the memory policy.
    pub fn advance_task<R: Rng>(&mut self, memory: &MemoryMode, rng: &mut R) -> NextTask {
        if let Some(b) = &self.belief {
            let area = self.world.agent().current_area.clone();
            self.belief = Some(b.apply_forgetting(memory, &area, rng));
        }
        self.position = (self.position + 1).min(self.task_count);
        self.current()
    }
}

/// Skill table with the built-in navigation skill always present.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkillBook {
    skills: BTreeMap<String, Skill>,
}

impl SkillBook {
    pub fn new(skills: impl IntoIterator<Item = Skill>) -> Self {
        let mut map: BTreeMap<String, Skill> = skills.into_iter().map(|s| (s.skill_id.clone(), s)).collect();
        map.entry("navigate_to".into()).or_insert_with(Skill::navigate_to);
        Self { skills: map }
    }

    pub fn get(&self, id: &str) -> Option<&Skill> {
        self.skills.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Skill> {
        self.skills.values()
    }

    /// Grounds a call whose arguments are already instance ids.
    pub fn ground(&self, call: &SkillCall) -> Result<GroundSkill, TaskError> {
        self.get(&call.skill_id)
            .ok_or_else(|| TaskError::UnknownSkill(call.skill_id.clone()))?
            .ground(&call.args)
    }

    pub fn expand(&self, call: &SkillCall) -> Result<Vec<PrimitiveAction>, TaskError> {
        Ok(expand_skill(&self.ground(call)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Amount, Edge, Node, NodeKind, ScenarioInit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn act(s: &str) -> PrimitiveAction {
        s.parse().unwrap()
    }

    #[test]
    fn expansion_order() {
        let s = Skill::from_text(
            "insert_capsule(?c:capsule, ?m:coffee_machine)",
            "t",
            "insert(?c, ?m)",
            &["open(?m)"],
            &["close(?m)"],
        )
        .unwrap();
        let g = s.ground(&["capsule_01".into(), "coffee_machine".into()]).unwrap();
        assert_eq!(
            expand_skill(&g),
            vec![
                act("open(coffee_machine)"),
                act("insert(capsule_01, coffee_machine)"),
                act("close(coffee_machine)")
            ]
        );
        let bare = Skill::from_text("wash(?x)", "t", "wash(?x)", &[], &[]).unwrap();
        assert_eq!(
            expand_skill(&bare.ground(&["cup_01".into()]).unwrap()),
            vec![act("wash(cup_01)")]
        );
        assert!(matches!(
            bare.ground(&[]),
            Err(TaskError::Arity {
                expected: 1,
                got: 0,
                ..
            })
        ));
    }

    #[test]
    fn skill_book_has_navigation() {
        let book = SkillBook::new([]);
        assert_eq!(
            book.expand(&"navigate_to(sink)".parse().unwrap()).unwrap(),
            vec![act("go_to(sink)")]
        );
        assert!(matches!(
            book.expand(&SkillCall::new("fly", &[])),
            Err(TaskError::UnknownSkill(_))
        ));
    }

    fn brewed() -> WorldGraph {
        WorldGraph::instantiate(&ScenarioInit {
            areas: vec!["coffee_area".into()],
            nodes: vec![
                Node::object("cup_01", "cup", "coffee_area").with_state("full"),
                Node::object("cup_02", "cup", "coffee_area").with_state("empty"),
                Node::object("brewed_coffee_01", "brewed_coffee", "coffee_area")
                    .with_kind(NodeKind::Substance)
                    .with_amount(Amount::Full),
            ],
            edges: vec![Edge::new("cup_01", Relation::Contains, "brewed_coffee_01")],
            agent_start: "coffee_area".into(),
            image_refs: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn goal_semantics() {
        let g = brewed();
        let goal =
            GoalPredicate::parse(&["contains(cup, brewed_coffee)", "state(brewed_coffee, amount=full)"]).unwrap();
        assert!(goal.holds(&g));
        // Existential per clause: one of the two cups is empty.
        assert!(GoalPredicate::parse(&["state(cup, empty)"]).unwrap().holds(&g));
        assert!(!GoalPredicate::parse(&["contains(cup_02, brewed_coffee)"])
            .unwrap()
            .holds(&g));
        assert!(GoalPredicate::default().holds(&g));
        let vocab: BTreeSet<String> = ["cup", "brewed_coffee"].map(String::from).into();
        assert_eq!(check_goal(&goal, &g, &vocab), Ok(true));
        let bad = GoalPredicate::parse(&["state(teapot, hot)"]).unwrap();
        assert_eq!(
            check_goal(&bad, &g, &vocab),
            Err(TaskError::UnknownLabel("teapot".into()))
        );
    }

    #[test]
    fn goal_text_round_trip() {
        for s in [
            "at(cup, sink)",
            "state(cup, full)",
            "state(cup, clean=true)",
            "state(milk, amount=partial)",
            "contains(fridge, milk)",
            "on(counter, cup)",
        ] {
            assert_eq!(s.parse::<GoalClause>().unwrap().to_string(), s);
        }
        assert!("contains(a)".parse::<GoalClause>().is_err());
        assert!("state(?x, open)".parse::<GoalClause>().is_err());
    }

    #[test]
    fn key_action_uses_labels() {
        let g = brewed();
        assert_eq!(KeyAction::of(&act("wash(cup_02)"), &g).to_string(), "wash(cup)");
        assert_eq!(
            KeyAction::of(&act("go_to(coffee_area)"), &g).to_string(),
            "go_to(coffee_area)"
        );
    }

    #[test]
    fn advance_carries_world() {
        let g = brewed();
        let hash = g.snapshot_hash();
        let mut st = EpisodeState::new(g, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(st.current(), NextTask::Task(0));
        assert_eq!(st.advance_task(&MemoryMode::Full, &mut rng), NextTask::Task(1));
        assert_eq!(st.world.snapshot_hash(), hash);
        assert_eq!(st.advance_task(&MemoryMode::Full, &mut rng), NextTask::EpisodeDone);
        assert_eq!(st.advance_task(&MemoryMode::Full, &mut rng), NextTask::EpisodeDone);
    }
}
