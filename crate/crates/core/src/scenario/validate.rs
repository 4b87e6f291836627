use std::collections::BTreeSet;
use std::fmt;

use super::{Diagnostic, Loc, ScenarioFile};
use crate::graph::{Slot, WorldGraph};
use crate::rules::{Effect, Predicate, Term};
use crate::task::{GoalClause, SkillBook};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub failures: Vec<Diagnostic>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Diagnostic> {
        self.checks.iter().flat_map(|c| &c.failures)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{:<18} {}", c.name, if c.passed() { "pass" } else { "FAIL" })?;
            for d in &c.failures {
                writeln!(f, "  {d}")?;
            }
        }
        Ok(())
    }
}

/// Runs every deterministic check. Never fails; the report carries findings.
pub fn validate_scenario(s: &ScenarioFile) -> ValidationReport {
    ValidationReport {
        checks: vec![
            CheckResult {
                name: "structure",
                failures: structure(s),
            },
            CheckResult {
                name: "gt_coverage",
                failures: gt_coverage(s),
            },
            CheckResult {
                name: "verb_coverage",
                failures: verb_coverage(s),
            },
            CheckResult {
                name: "storage_pairing",
                failures: storage_pairing(s),
            },
            CheckResult {
                name: "state_vocabulary",
                failures: state_vocabulary(s),
            },
        ],
    }
}

fn structure(s: &ScenarioFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let areas: BTreeSet<&str> = s.areas.iter().map(|a| a.id.as_str()).collect();
    let ids: BTreeSet<&str> = s
        .objects
        .iter()
        .map(|o| o.node.instance_id.as_str())
        .chain(areas.iter().copied())
        .collect();
    if areas.is_empty() {
        out.push(Diagnostic::new("structure", Loc::default(), "no areas declared"));
    }
    if !areas.contains(s.agent_start.as_str()) {
        out.push(Diagnostic::new(
            "structure",
            s.agent_start_loc,
            format!("agent_start `{}` is not an area", s.agent_start),
        ));
    }
    for o in &s.objects {
        let id = &o.node.instance_id;
        if let Some(at) = &o.node.location {
            if !areas.contains(at.as_str()) {
                out.push(Diagnostic::new(
                    "structure",
                    o.loc,
                    format!("`{id}` placed in unknown area `{at}`"),
                ));
            }
        }
        if let Some((_, p)) = &o.parent {
            if !ids.contains(p.as_str()) || areas.contains(p.as_str()) {
                out.push(Diagnostic::new(
                    "structure",
                    o.loc,
                    format!("`{id}` placed in/on unknown object `{p}`"),
                ));
            }
        }
    }
    for (e, loc) in &s.edges {
        for end in [&e.src, &e.dst] {
            if !ids.contains(end.as_str()) {
                out.push(Diagnostic::new(
                    "structure",
                    *loc,
                    format!("edge `{e}` names unknown `{end}`"),
                ));
            }
        }
    }
    if out.is_empty() {
        if let Err(e) = WorldGraph::instantiate(&s.init()) {
            out.push(Diagnostic::new(
                "structure",
                Loc::default(),
                format!("initial graph: {e}"),
            ));
        }
    }
    if s.tasks.is_empty() {
        out.push(Diagnostic::new("structure", Loc::default(), "no tasks declared"));
    }
    let symbols = s.symbols();
    for t in &s.tasks {
        if t.gt.is_empty() {
            out.push(Diagnostic::new(
                "structure",
                t.loc,
                format!("task `{}` has an empty GT chain", t.task_id),
            ));
        }
        if t.goal.clauses.is_empty() {
            out.push(Diagnostic::new(
                "structure",
                t.loc,
                format!("task `{}` has an empty goal", t.task_id),
            ));
        }
        for sel in t.goal.selectors() {
            if !symbols.contains(sel) {
                out.push(Diagnostic::new(
                    "structure",
                    t.loc,
                    format!("task `{}` goal names unknown `{sel}`", t.task_id),
                ));
            }
        }
        for c in &t.goal.clauses {
            if let GoalClause::Slot {
                slot: Slot::Location,
                value,
                ..
            } = c
            {
                if !areas.contains(value.as_str()) {
                    out.push(Diagnostic::new(
                        "structure",
                        t.loc,
                        format!("task `{}` goal names unknown area `{value}`", t.task_id),
                    ));
                }
            }
        }
    }
    for r in &s.rules {
        for t in r.rule.preconditions.iter().flat_map(Predicate::terms) {
            dangling(t, &ids, &r.rule.rule_id, r.loc, &mut out);
        }
        for t in r.rule.effects.iter().flat_map(Effect::terms) {
            dangling(t, &ids, &r.rule.rule_id, r.loc, &mut out);
        }
    }
    out
}

fn dangling(t: &Term, ids: &BTreeSet<&str>, rule_id: &str, loc: Loc, out: &mut Vec<Diagnostic>) {
    if let Term::Lit(l) = t {
        if !ids.contains(l.as_str()) {
            out.push(Diagnostic::new(
                "structure",
                loc,
                format!("rule `{rule_id}` names unknown `{l}`"),
            ));
        }
    }
}

/// Every `(slot, value)` that can ever hold: initial values plus effect writes.
fn producible(s: &ScenarioFile) -> BTreeSet<(Slot, String)> {
    let mut out: BTreeSet<(Slot, String)> = s
        .objects
        .iter()
        .flat_map(|o| o.node.slots())
        .filter(|(slot, _)| *slot != Slot::Location)
        .collect();
    for r in &s.rules {
        for e in &r.rule.effects {
            out.extend(e.written_values().into_iter().map(|(sl, v)| (sl, v.to_string())));
        }
    }
    out
}

fn gt_coverage(s: &ScenarioFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let book = SkillBook::new(s.skills.iter().map(|d| d.skill.clone()));
    let rules = s.rule_list();
    let ruled: BTreeSet<&str> = rules.iter().map(|r| r.pattern.action_type.as_str()).collect();
    for t in &s.tasks {
        for (i, call) in t.gt.iter().enumerate() {
            match book.expand(call) {
                Err(e) => out.push(Diagnostic::new(
                    "gt_coverage",
                    t.loc,
                    format!("task `{}` step {i} `{call}`: {e}", t.task_id),
                )),
                Ok(prims) => {
                    for p in prims {
                        if !ruled.contains(s.normalize_verb(&p.action_type)) {
                            out.push(Diagnostic::new(
                                "gt_coverage",
                                t.loc,
                                format!("task `{}` step {i}: no rule for `{p}`", t.task_id),
                            ));
                        }
                    }
                }
            }
        }
    }
    let produced = producible(s);
    for r in &s.rules {
        for p in &r.rule.preconditions {
            if let Predicate::State { slot, value, .. } = p {
                if !produced.contains(&(slot.clone(), value.clone())) {
                    out.push(Diagnostic::new(
                        "gt_coverage",
                        r.loc,
                        format!("rule `{}`: precondition `{p}` can never hold", r.rule.rule_id),
                    ));
                }
            }
        }
    }
    out
}

fn verb_coverage(s: &ScenarioFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let vocab = s.vocabulary();
    for r in &s.rules {
        let v = &r.rule.pattern.action_type;
        if !vocab.contains(v.as_str()) {
            out.push(Diagnostic::new(
                "verb_coverage",
                r.loc,
                format!("rule `{}`: action type `{v}` missing from the verb map", r.rule.rule_id),
            ));
        }
    }
    for d in &s.skills {
        let sk = &d.skill;
        for p in sk.pre_context.iter().chain([&sk.center]).chain(&sk.post_context) {
            if !vocab.contains(p.action_type.as_str()) {
                out.push(Diagnostic::new(
                    "verb_coverage",
                    d.loc,
                    format!(
                        "skill `{}`: action type `{}` missing from the verb map",
                        sk.skill_id, p.action_type
                    ),
                ));
            }
        }
    }
    for t in &s.tasks {
        for k in t.key_actions.iter().flatten() {
            if !vocab.contains(k.action_type.as_str()) {
                out.push(Diagnostic::new(
                    "verb_coverage",
                    t.loc,
                    format!("task `{}`: key action `{k}` missing from the verb map", t.task_id),
                ));
            }
        }
    }
    out
}

fn storage_pairing(s: &ScenarioFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let rules = s.rule_list();
    let has = |v: &str| rules.iter().any(|r| r.pattern.action_type == v);
    for (a, b) in [("open", "close"), ("close", "open")] {
        if has(a) && !has(b) {
            let loc = s
                .rules
                .iter()
                .find(|r| r.rule.pattern.action_type == a)
                .map_or(Loc::default(), |r| r.loc);
            out.push(Diagnostic::new(
                "storage_pairing",
                loc,
                format!("`{a}` rule without a matching `{b}` rule"),
            ));
        }
    }
    let openable: BTreeSet<&str> = s
        .objects
        .iter()
        .filter(|o| matches!(o.node.state.as_deref(), Some("open" | "closed")))
        .map(|o| o.node.instance_id.as_str())
        .collect();
    let book = SkillBook::new(s.skills.iter().map(|d| d.skill.clone()));
    for t in &s.tasks {
        for call in &t.gt {
            for p in book.expand(call).unwrap_or_default() {
                if matches!(s.normalize_verb(&p.action_type), "open" | "close") {
                    let target = p.object.as_deref().unwrap_or("");
                    if !openable.contains(target) {
                        out.push(Diagnostic::new(
                            "storage_pairing",
                            t.loc,
                            format!(
                                "task `{}`: `{p}` targets `{target}`, which is not an openable container",
                                t.task_id
                            ),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn state_vocabulary(s: &ScenarioFile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let check = |slot: &Slot, value: &str, what: &str, loc: Loc, out: &mut Vec<Diagnostic>| match slot {
        Slot::State if !s.states.contains(value) => out.push(Diagnostic::new(
            "state_vocabulary",
            loc,
            format!("{what}: undeclared state `{value}`"),
        )),
        Slot::Flag(k) if !s.flags.contains(k) => out.push(Diagnostic::new(
            "state_vocabulary",
            loc,
            format!("{what}: undeclared slot `state.{k}`"),
        )),
        _ => {}
    };
    for o in &s.objects {
        for (slot, value) in o.node.slots() {
            check(
                &slot,
                &value,
                &format!("object `{}`", o.node.instance_id),
                o.loc,
                &mut out,
            );
        }
    }
    for r in &s.rules {
        let what = format!("rule `{}`", r.rule.rule_id);
        for p in &r.rule.preconditions {
            if let Predicate::State { slot, value, .. } = p {
                check(slot, value, &what, r.loc, &mut out);
            }
        }
        for e in &r.rule.effects {
            for (slot, value) in e.written_values() {
                check(&slot, value, &what, r.loc, &mut out);
            }
            if let Effect::Unset {
                slot: slot @ Slot::Flag(_),
                ..
            } = e
            {
                check(slot, "", &what, r.loc, &mut out);
            }
        }
    }
    for t in &s.tasks {
        for c in &t.goal.clauses {
            if let GoalClause::Slot { slot, value, .. } = c {
                check(slot, value, &format!("task `{}`", t.task_id), t.loc, &mut out);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures::MINI, parse_scenario};
    use super::*;

    fn report(text: &str) -> ValidationReport {
        validate_scenario(&parse_scenario(text).unwrap())
    }

    #[test]
    fn fixture_passes() {
        let r = report(MINI);
        assert!(r.passed(), "{r}");
        assert_eq!(r.checks.len(), 5);
    }

    #[test]
    fn undefined_slot_names_rule() {
        let r = report(&MINI.replace(
            r#"pre = ["at(?k, here)", "state(?k, empty)"]"#,
            r#"pre = ["at(?k, here)", "state(?k, rinsed=true)"]"#,
        ));
        let c = r.check("state_vocabulary").unwrap();
        assert!(!c.passed());
        assert!(c.failures.iter().any(|d| d.message.contains("rule `fill`")), "{r}");
        assert!(!r.check("gt_coverage").unwrap().passed());
    }

    #[test]
    fn unmapped_gt_verb_fails() {
        let r = report(&MINI.replace("fill = \"fill\"\n", ""));
        assert!(!r.check("verb_coverage").unwrap().passed(), "{r}");
    }

    #[test]
    fn unknown_skill_and_empty_task() {
        let r = report(&MINI.replace("gt = [\"fill_cup(cup_01)\"]", "gt = [\"pour(cup_01)\"]"));
        assert!(!r.check("gt_coverage").unwrap().passed());
        let r = report(&MINI.replace("gt = [\"fill_cup(cup_01)\"]", "gt = []"));
        assert!(!r.check("structure").unwrap().passed());
    }

    #[test]
    fn open_requires_close_and_container() {
        let text = MINI
            .replace("id = \"close\"", "id = \"shut\"")
            .replace("action = \"close(?x)\"", "action = \"shut(?x)\"");
        let text = text
            .replace("close = \"close\"", "shut = \"shut\"")
            .replace("post = [\"close(?m)\"]", "post = [\"shut(?m)\"]");
        let r = report(&text);
        assert!(!r.check("storage_pairing").unwrap().passed(), "{r}");
        let r = report(&MINI.replace("state = \"closed\"\nflags", "state = \"empty\"\nflags"));
        assert!(!r.check("storage_pairing").unwrap().passed(), "{r}");
    }
}
