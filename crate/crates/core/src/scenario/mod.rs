//! Declarative scenario files: parsing, validation, compilation into an
//! episode plus transition dataset, and the dataset audit.

mod audit;
pub mod bundled;
mod compile;
mod dataset;
mod validate;

pub use audit::{audit_dataset, AuditReport};
pub use compile::{compile_episode, CompileError, Episode, ExecMeta, ReplayFailure, TransitionRecord};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetError, Manifest, ManifestTask};
pub use validate::{validate_scenario, CheckResult, ValidationReport};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use toml::Spanned;

use crate::graph::{Amount, Edge, Node, NodeKind, Relation, ScenarioInit};
use crate::rules::{Effect, WorldRule};
use crate::syntax::{Call, SyntaxError};
use crate::task::{GoalPredicate, KeyAction, Skill, SkillCall};

/// Required value of the `format` header.
pub const SCENARIO_FORMAT: &str = "hwsim-scenario/1";

/// 1-based line and column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl Loc {
    pub fn of_offset(text: &str, offset: usize) -> Self {
        let offset = offset.min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
        Self { line, col }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Located error or finding; renders as `error[code] line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub loc: Loc,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: &'static str, loc: Loc, message: impl Into<String>) -> Self {
        Self {
            code,
            loc,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}] {}: {}", self.code, self.loc, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct ParseError(pub Vec<Diagnostic>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AreaDecl {
    pub id: String,
    pub image: String,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDecl {
    pub node: Node,
    /// `in`/`on` parent, as declared.
    pub parent: Option<(Relation, String)>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub rule: WorldRule,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillDecl {
    pub skill: Skill,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDecl {
    pub task_id: String,
    pub instruction: String,
    pub goal: GoalPredicate,
    pub gt: Vec<SkillCall>,
    /// Explicit key actions; defaults to the GT center actions when absent.
    pub key_actions: Option<Vec<KeyAction>>,
    pub loc: Loc,
}

/// A parsed scenario. Every declaration keeps its source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFile {
    pub id: String,
    pub description: String,
    pub agent_start: String,
    pub agent_start_loc: Loc,
    /// Declared state-descriptor vocabulary (`state` slot values).
    pub states: BTreeSet<String>,
    /// Declared flag keys (`state.<key>` sub-slots).
    pub flags: BTreeSet<String>,
    pub areas: Vec<AreaDecl>,
    pub objects: Vec<ObjectDecl>,
    pub edges: Vec<(Edge, Loc)>,
    /// Raw verb → normalized action type.
    pub verbs: BTreeMap<String, String>,
    pub rules: Vec<RuleDecl>,
    pub skills: Vec<SkillDecl>,
    pub tasks: Vec<TaskDecl>,
    /// The exact text this was parsed from.
    pub source_text: String,
}

/// Action types that exist without being declared.
pub const BUILTIN_ACTIONS: &[&str] = &["go_to"];

impl ScenarioFile {
    /// Normalized action vocabulary: verb-map targets plus built-ins.
    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.verbs
            .values()
            .map(String::as_str)
            .chain(BUILTIN_ACTIONS.iter().copied())
            .collect()
    }

    /// Maps a raw verb to its action type; already-normalized verbs pass through.
    pub fn normalize_verb<'a>(&'a self, verb: &'a str) -> &'a str {
        self.verbs.get(verb).map_or(verb, String::as_str)
    }

    pub fn init(&self) -> ScenarioInit {
        ScenarioInit {
            areas: self.areas.iter().map(|a| a.id.clone()).collect(),
            nodes: self.objects.iter().map(|o| o.node.clone()).collect(),
            edges: self
                .objects
                .iter()
                .filter_map(|o| {
                    o.parent
                        .as_ref()
                        .map(|(rel, p)| Edge::new(p.clone(), *rel, o.node.instance_id.clone()))
                })
                .chain(self.edges.iter().map(|(e, _)| e.clone()))
                .collect(),
            agent_start: self.agent_start.clone(),
            image_refs: self.areas.iter().map(|a| (a.id.clone(), a.image.clone())).collect(),
        }
    }

    /// Declared rules plus a built-in `go_to` rule when none is authored.
    pub fn rule_list(&self) -> Vec<WorldRule> {
        let mut rules: Vec<WorldRule> = self.rules.iter().map(|r| r.rule.clone()).collect();
        if !rules.iter().any(|r| r.pattern.action_type == "go_to") {
            rules.push(
                WorldRule::from_text("go_to", "builtin", "go_to(?a:area)", &[], &["move_agent(?a)"]).expect("static"),
            );
        }
        rules
    }

    /// Every id, label and area the scenario can produce, for goal checks.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.areas.iter().map(|a| a.id.clone()).collect();
        for o in &self.objects {
            out.insert(o.node.instance_id.clone());
            out.insert(o.node.label.clone());
        }
        for r in &self.rules {
            for e in &r.rule.effects {
                if let Effect::Add { label, .. } = e {
                    out.insert(label.clone());
                }
            }
        }
        out
    }

    /// Labels of every declared object and every rule-created node.
    pub fn labels(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.objects.iter().map(|o| o.node.label.as_str()).collect();
        for r in &self.rules {
            for e in &r.rule.effects {
                if let Effect::Add { label, .. } = e {
                    out.insert(label);
                }
            }
        }
        out
    }
}

// --- raw TOML shape ---

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    format: Spanned<String>,
    id: String,
    #[serde(default)]
    description: String,
    agent_start: Spanned<String>,
    #[serde(default)]
    states: Vec<String>,
    #[serde(default)]
    flags: Vec<String>,
    areas: Vec<RawArea>,
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default)]
    edges: Vec<Spanned<String>>,
    #[serde(default)]
    verbs: BTreeMap<String, String>,
    #[serde(default)]
    rules: Vec<RawRule>,
    #[serde(default)]
    skills: Vec<RawSkill>,
    #[serde(default)]
    tasks: Vec<RawTask>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    id: Spanned<String>,
    image: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    id: Spanned<String>,
    label: Option<String>,
    kind: Option<String>,
    at: Option<String>,
    #[serde(rename = "in")]
    inside: Option<String>,
    on: Option<String>,
    state: Option<String>,
    amount: Option<String>,
    #[serde(default)]
    flags: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: Spanned<String>,
    source: String,
    action: String,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    effects: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSkill {
    signature: Spanned<String>,
    source: String,
    center: String,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    post: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    id: Spanned<String>,
    instruction: String,
    #[serde(default)]
    goal: Vec<String>,
    #[serde(default)]
    gt: Vec<String>,
    key_actions: Option<Vec<String>>,
}

fn parse_key_action(text: &str) -> Result<KeyAction, SyntaxError> {
    let call = Call::parse(text)?;
    if call.args.len() > 1 || call.args.iter().any(|a| a.contains('=') || a.starts_with('?')) {
        return Err(SyntaxError {
            text: text.to_string(),
            reason: "key actions are `verb(label)` or `verb()`".into(),
        });
    }
    Ok(KeyAction {
        action_type: call.name,
        object_label: call.args.into_iter().next(),
    })
}

/// Parses scenario text. Syntax errors, bad expressions and duplicate ids
/// are all reported, each with its location.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ParseError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let loc = e.span().map_or(Loc::default(), |s| Loc::of_offset(text, s.start));
        ParseError(vec![Diagnostic::new("syntax", loc, e.message().trim().to_string())])
    })?;
    let at = |span: std::ops::Range<usize>| Loc::of_offset(text, span.start);
    let mut diags = Vec::new();

    if raw.format.get_ref() != SCENARIO_FORMAT {
        diags.push(Diagnostic::new(
            "format",
            at(raw.format.span()),
            format!(
                "unsupported format `{}`, expected `{SCENARIO_FORMAT}`",
                raw.format.get_ref()
            ),
        ));
    }

    // Duplicate ids across areas and objects name both definitions.
    let mut seen: BTreeMap<String, Loc> = BTreeMap::new();
    let mut claim = |id: &str, loc: Loc, diags: &mut Vec<Diagnostic>| {
        if let Some(first) = seen.get(id) {
            diags.push(Diagnostic::new(
                "duplicate-id",
                loc,
                format!("duplicate instance id `{id}` (first defined at {first})"),
            ));
        } else {
            seen.insert(id.to_string(), loc);
        }
    };

    let mut areas = Vec::new();
    for a in &raw.areas {
        let loc = at(a.id.span());
        let id = a.id.get_ref().clone();
        claim(&id, loc, &mut diags);
        areas.push(AreaDecl {
            image: a.image.clone().unwrap_or_else(|| format!("anchors/{id}.png")),
            id,
            loc,
        });
    }

    let mut objects = Vec::new();
    let mut pending_location: Vec<usize> = Vec::new();
    for o in &raw.objects {
        let loc = at(o.id.span());
        let id = o.id.get_ref().clone();
        claim(&id, loc, &mut diags);
        let kind = match o.kind.as_deref().map(str::parse::<NodeKind>) {
            None => NodeKind::Object,
            Some(Ok(NodeKind::Area)) => {
                diags.push(Diagnostic::new(
                    "object",
                    loc,
                    format!("`{id}`: declare areas under [[areas]]"),
                ));
                NodeKind::Object
            }
            Some(Ok(k)) => k,
            Some(Err(e)) => {
                diags.push(Diagnostic::new("object", loc, format!("`{id}`: {e}")));
                NodeKind::Object
            }
        };
        let amount = match o.amount.as_deref().map(str::parse::<Amount>) {
            None => None,
            Some(Ok(a)) => Some(a),
            Some(Err(e)) => {
                diags.push(Diagnostic::new("object", loc, format!("`{id}`: {e}")));
                None
            }
        };
        let parent = match (&o.inside, &o.on) {
            (Some(_), Some(_)) => {
                diags.push(Diagnostic::new(
                    "object",
                    loc,
                    format!("`{id}`: both `in` and `on` given"),
                ));
                None
            }
            (Some(p), None) => Some((Relation::Contains, p.clone())),
            (None, Some(p)) => Some((Relation::Supports, p.clone())),
            (None, None) => None,
        };
        if o.at.is_none() && parent.is_none() {
            diags.push(Diagnostic::new(
                "object",
                loc,
                format!("`{id}`: needs `at`, `in` or `on`"),
            ));
        }
        if o.at.is_none() {
            pending_location.push(objects.len());
        }
        let mut node = Node {
            instance_id: id.clone(),
            label: o.label.clone().unwrap_or_else(|| id.clone()),
            kind,
            location: o.at.clone(),
            state: o.state.clone(),
            amount,
            flags: o.flags.clone(),
        };
        if node.flags.keys().any(|k| k.is_empty() || k.contains('.')) {
            diags.push(Diagnostic::new("object", loc, format!("`{id}`: invalid flag key")));
            node.flags.retain(|k, _| !k.is_empty() && !k.contains('.'));
        }
        objects.push(ObjectDecl { node, parent, loc });
    }
    // Objects placed only in/on a parent inherit the parent's area.
    for _ in 0..objects.len() {
        let mut progressed = false;
        for &i in &pending_location {
            if objects[i].node.location.is_some() {
                continue;
            }
            let parent = objects[i].parent.as_ref().map(|(_, p)| p.clone());
            let area = parent.and_then(|p| objects.iter().find(|o| o.node.instance_id == p)?.node.location.clone());
            if area.is_some() {
                objects[i].node.location = area;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    let mut edges = Vec::new();
    for e in &raw.edges {
        let loc = at(e.span());
        let parts: Vec<&str> = e.get_ref().split_whitespace().collect();
        match parts.as_slice() {
            [src, rel, dst] => match rel.parse::<Relation>() {
                Ok(r) => edges.push((Edge::new(*src, r, *dst), loc)),
                Err(err) => diags.push(Diagnostic::new("edge", loc, err)),
            },
            _ => diags.push(Diagnostic::new(
                "edge",
                loc,
                format!("edge `{}` must be `src relation dst`", e.get_ref()),
            )),
        }
    }

    let mut rules = Vec::new();
    let mut rule_ids: BTreeMap<String, Loc> = BTreeMap::new();
    for r in &raw.rules {
        let loc = at(r.id.span());
        let id = r.id.get_ref();
        if let Some(first) = rule_ids.insert(id.clone(), loc) {
            diags.push(Diagnostic::new(
                "duplicate-id",
                loc,
                format!("duplicate rule id `{id}` (first defined at {first})"),
            ));
        }
        let pre: Vec<&str> = r.pre.iter().map(String::as_str).collect();
        let eff: Vec<&str> = r.effects.iter().map(String::as_str).collect();
        match WorldRule::from_text(id, &r.source, &r.action, &pre, &eff) {
            Ok(rule) => rules.push(RuleDecl { rule, loc }),
            Err(e) => diags.push(Diagnostic::new("rule", loc, format!("rule `{id}`: {e}"))),
        }
    }

    let mut skills = Vec::new();
    let mut skill_ids: BTreeMap<String, Loc> = BTreeMap::new();
    for s in &raw.skills {
        let loc = at(s.signature.span());
        let pre: Vec<&str> = s.pre.iter().map(String::as_str).collect();
        let post: Vec<&str> = s.post.iter().map(String::as_str).collect();
        match Skill::from_text(s.signature.get_ref(), &s.source, &s.center, &pre, &post) {
            Ok(skill) => {
                if let Some(first) = skill_ids.insert(skill.skill_id.clone(), loc) {
                    diags.push(Diagnostic::new(
                        "duplicate-id",
                        loc,
                        format!("duplicate skill `{}` (first defined at {first})", skill.skill_id),
                    ));
                }
                skills.push(SkillDecl { skill, loc });
            }
            Err(e) => diags.push(Diagnostic::new("skill", loc, e.to_string())),
        }
    }

    let mut tasks = Vec::new();
    let mut task_ids: BTreeMap<String, Loc> = BTreeMap::new();
    for t in &raw.tasks {
        let loc = at(t.id.span());
        let id = t.id.get_ref().clone();
        if let Some(first) = task_ids.insert(id.clone(), loc) {
            diags.push(Diagnostic::new(
                "duplicate-id",
                loc,
                format!("duplicate task `{id}` (first defined at {first})"),
            ));
        }
        let goal_text: Vec<&str> = t.goal.iter().map(String::as_str).collect();
        let goal = GoalPredicate::parse(&goal_text).unwrap_or_else(|e| {
            diags.push(Diagnostic::new("task", loc, format!("task `{id}` goal: {e}")));
            GoalPredicate::default()
        });
        let mut gt = Vec::new();
        for g in &t.gt {
            match g.parse::<SkillCall>() {
                Ok(c) => gt.push(c),
                Err(e) => diags.push(Diagnostic::new("task", loc, format!("task `{id}` gt: {e}"))),
            }
        }
        let key_actions = t.key_actions.as_ref().map(|ks| {
            ks.iter()
                .filter_map(|k| match parse_key_action(k) {
                    Ok(k) => Some(k),
                    Err(e) => {
                        diags.push(Diagnostic::new("task", loc, format!("task `{id}` key action: {e}")));
                        None
                    }
                })
                .collect()
        });
        tasks.push(TaskDecl {
            task_id: id,
            instruction: t.instruction.clone(),
            goal,
            gt,
            key_actions,
            loc,
        });
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| d.loc);
        return Err(ParseError(diags));
    }
    Ok(ScenarioFile {
        id: raw.id,
        description: raw.description,
        agent_start_loc: at(raw.agent_start.span()),
        agent_start: raw.agent_start.into_inner(),
        states: raw.states.into_iter().collect(),
        flags: raw.flags.into_iter().collect(),
        areas,
        objects,
        edges,
        verbs: raw.verbs,
        rules,
        skills,
        tasks,
        source_text: text.to_string(),
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    /// Small two-task scenario used across module tests.
    pub const MINI: &str = r#"
format = "hwsim-scenario/1"
id = "mini"
agent_start = "coffee_area"
states = ["open", "closed", "empty", "full"]
flags = ["loaded"]

[[areas]]
id = "coffee_area"

[[areas]]
id = "storage_cabinet"

[[objects]]
id = "coffee_machine"
at = "coffee_area"
state = "closed"
flags = { loaded = "false" }

[[objects]]
id = "cup_01"
label = "cup"
at = "coffee_area"
state = "empty"

[[objects]]
id = "capsule_01"
label = "capsule"
at = "storage_cabinet"

[verbs]
open = "open"
close = "close"
"pick up" = "pick_up"
pick_up = "pick_up"
insert = "insert"
fill = "fill"

[[rules]]
id = "open"
source = "scenario:mini"
action = "open(?x)"
pre = ["state(?x, closed)", "at(?x, here)"]
effects = ["set(?x, open)"]

[[rules]]
id = "close"
source = "scenario:mini"
action = "close(?x)"
pre = ["state(?x, open)", "at(?x, here)"]
effects = ["set(?x, closed)"]

[[rules]]
id = "pick"
source = "scenario:mini"
action = "pick_up(?o)"
pre = ["at(?o, here)", "hand(any, empty)"]
effects = ["detach(?o)", "grab(?o)"]

[[rules]]
id = "insert"
source = "scenario:mini"
action = "insert(?c:capsule, ?m:coffee_machine)"
pre = ["hand(any, ?c)", "at(?m, here)", "state(?m, open)"]
effects = ["release(?c)", "link(?m, contains, ?c)", "set(?m, loaded=true)"]

[[rules]]
id = "fill"
source = "scenario:mini"
action = "fill(?k:cup)"
pre = ["at(?k, here)", "state(?k, empty)"]
effects = ["set(?k, full)"]

[[skills]]
signature = "fetch(?o)"
source = "scenario:mini"
center = "pick_up(?o)"

[[skills]]
signature = "load(?c:capsule, ?m:coffee_machine)"
source = "scenario:mini"
center = "insert(?c, ?m)"
pre = ["open(?m)"]
post = ["close(?m)"]

[[skills]]
signature = "fill_cup(?k:cup)"
source = "scenario:mini"
center = "fill(?k)"

[[tasks]]
id = "load_machine"
instruction = "Put a capsule in the coffee machine."
goal = ["state(coffee_machine, loaded=true)", "state(coffee_machine, closed)"]
gt = ["navigate_to(storage_cabinet)", "fetch(capsule_01)", "navigate_to(coffee_area)", "load(capsule_01, coffee_machine)"]

[[tasks]]
id = "fill_cup"
instruction = "Fill the cup."
goal = ["state(cup, full)"]
gt = ["fill_cup(cup_01)"]
"#;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fixture() {
        let s = parse_scenario(fixtures::MINI).unwrap();
        assert_eq!(s.tasks.len(), 2);
        assert_eq!(s.objects.len(), 3);
        assert_eq!(s.areas[1].image, "anchors/storage_cabinet.png");
        assert_eq!(s.normalize_verb("pick up"), "pick_up");
        assert_eq!(s.normalize_verb("pick_up"), "pick_up");
        assert!(s.vocabulary().contains("go_to"));
        assert_eq!(s.rule_list().last().unwrap().source, "builtin");
        assert_eq!(
            s.tasks[0].loc.line,
            s.source_text[..s.source_text.find("id = \"load_machine\"").unwrap()]
                .lines()
                .count()
                + 1
        );
    }

    #[test]
    fn truncated_file_reports_eof() {
        let text = &fixtures::MINI[..fixtures::MINI.find("gt = [\"fill_cup").unwrap() + 10];
        let err = parse_scenario(text).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].code, "syntax");
        let last_line = text.lines().count();
        assert!(err.0[0].loc.line >= last_line - 1, "{:?}", err.0[0]);
    }

    #[test]
    fn duplicate_id_names_both_definitions() {
        let text = fixtures::MINI.replace("id = \"capsule_01\"", "id = \"cup_01\"");
        let err = parse_scenario(&text).unwrap_err();
        let d = err.0.iter().find(|d| d.code == "duplicate-id").unwrap();
        let first = Loc::of_offset(&text, text.find("id = \"cup_01\"").unwrap() + 5);
        assert!(d.message.contains(&format!("first defined at {first}")), "{d}");
        assert!(d.loc > first);
    }

    #[test]
    fn wrong_header_and_duplicate_keys() {
        let text = fixtures::MINI.replace("hwsim-scenario/1", "hwsim-scenario/9");
        assert_eq!(parse_scenario(&text).unwrap_err().0[0].code, "format");
        let text = fixtures::MINI.replace("id = \"mini\"", "id = \"mini\"\nid = \"again\"");
        assert_eq!(parse_scenario(&text).unwrap_err().0[0].code, "syntax");
    }

    #[test]
    fn nested_objects_inherit_area() {
        let text = fixtures::MINI.replace(
            "[[objects]]\nid = \"capsule_01\"\nlabel = \"capsule\"\nat = \"storage_cabinet\"",
            "[[objects]]\nid = \"drawer\"\nat = \"storage_cabinet\"\nstate = \"closed\"\n\n[[objects]]\nid = \"capsule_01\"\nlabel = \"capsule\"\nin = \"drawer\"",
        );
        let s = parse_scenario(&text).unwrap();
        let cap = s.objects.iter().find(|o| o.node.instance_id == "capsule_01").unwrap();
        assert_eq!(cap.node.location.as_deref(), Some("storage_cabinet"));
        assert_eq!(cap.parent, Some((Relation::Contains, "drawer".into())));
    }

    #[test]
    fn loc_of_offset() {
        assert_eq!(Loc::of_offset("ab\ncd", 0), Loc { line: 1, col: 1 });
        assert_eq!(Loc::of_offset("ab\ncd", 4), Loc { line: 2, col: 2 });
        assert_eq!(Loc::of_offset("ab\ncd", 99), Loc { line: 2, col: 3 });
    }
}
