use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::effect::{apply_effect_set, ground_effects, Effect, EffectSet};
use super::predicate::{GroundPredicate, Predicate};
use super::term::{label_matches, Binding, Term};
use crate::graph::WorldGraph;
use crate::syntax::{Call, SyntaxError};

/// Atomic action submitted to the simulator: `verb(object, target)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimitiveAction {
    pub action_type: String,
    pub object: Option<String>,
    pub target: Option<String>,
}

impl PrimitiveAction {
    pub fn new(action_type: impl Into<String>) -> Self {
        Self {
            action_type: action_type.into(),
            object: None,
            target: None,
        }
    }

    pub fn with_object(mut self, object: impl Into<String>) -> Self {
        self.object = Some(object.into());
        self
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn args(&self) -> impl Iterator<Item = &str> {
        self.object.as_deref().into_iter().chain(self.target.as_deref())
    }
}

impl fmt::Display for PrimitiveAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.action_type)?;
        match (&self.object, &self.target) {
            (Some(o), Some(t)) => write!(f, "{o}, {t}")?,
            (Some(o), None) => write!(f, "{o}")?,
            (None, Some(t)) => write!(f, ", {t}")?,
            (None, None) => {}
        }
        f.write_str(")")
    }
}

impl FromStr for PrimitiveAction {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        if call.args.len() > 2 || call.args.iter().any(|a| a.contains('=') || a.starts_with('?')) {
            return Err(SyntaxError {
                text: s.to_string(),
                reason: "actions take at most two instance arguments".into(),
            });
        }
        let mut args = call.args.into_iter();
        Ok(Self {
            action_type: call.name,
            object: args.next(),
            target: args.next(),
        })
    }
}

impl Serialize for PrimitiveAction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PrimitiveAction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `(action_type, object-role pattern, target-role pattern)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionPattern {
    pub action_type: String,
    pub object: Option<Term>,
    pub target: Option<Term>,
}

impl ActionPattern {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let call = Call::parse(text)?;
        if call.args.len() > 2 || call.args.iter().any(|a| a.contains('=') || a == "here") {
            return Err(SyntaxError {
                text: text.to_string(),
                reason: "patterns take at most two variable or literal roles".into(),
            });
        }
        let mut args = call.args.iter().map(|a| Term::parse(a));
        Ok(Self {
            action_type: call.name.clone(),
            object: args.next(),
            target: args.next(),
        })
    }

    /// Unifies with a concrete action; label constraints are checked against `g`.
    pub fn unify(&self, g: &WorldGraph, action: &PrimitiveAction) -> Option<Binding> {
        if self.action_type != action.action_type {
            return None;
        }
        let mut binding = Binding::new();
        for (pat, arg) in [(&self.object, &action.object), (&self.target, &action.target)] {
            match (pat, arg) {
                (None, None) => {}
                (Some(Term::Lit(l)), Some(a)) if l == a => {}
                (Some(Term::Var { name, label }), Some(a)) => {
                    if let Some(label) = label {
                        if !label_matches(g, a, label) {
                            return None;
                        }
                    }
                    match binding.get(name) {
                        Some(prev) if prev != a => return None,
                        _ => {
                            binding.insert(name.clone(), a.clone());
                        }
                    }
                }
                _ => return None,
            }
        }
        Some(binding)
    }

    pub fn vars(&self) -> Vec<&str> {
        [&self.object, &self.target]
            .into_iter()
            .flatten()
            .filter_map(Term::var_name)
            .collect()
    }
}

impl fmt::Display for ActionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = [&self.object, &self.target]
            .into_iter()
            .flatten()
            .map(Term::to_string)
            .collect();
        write!(f, "{}({})", self.action_type, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldRule {
    pub rule_id: String,
    /// Provenance annotation carried from the scenario.
    pub source: String,
    pub pattern: ActionPattern,
    /// Ordered conjunction; order defines the first violation.
    pub preconditions: Vec<Predicate>,
    pub effects: Vec<Effect>,
}

/// Rules in deterministic load order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleBase {
    rules: Vec<WorldRule>,
}

impl RuleBase {
    pub fn new(rules: Vec<WorldRule>) -> Self {
        Self { rules }
    }

    pub fn rules(&self) -> &[WorldRule] {
        &self.rules
    }

    pub fn action_types(&self) -> std::collections::BTreeSet<&str> {
        self.rules.iter().map(|r| r.pattern.action_type.as_str()).collect()
    }

    /// First rule in load order whose pattern unifies with the action.
    pub fn match_rule(&self, g: &WorldGraph, action: &PrimitiveAction) -> Option<(&WorldRule, Binding)> {
        self.rules
            .iter()
            .find_map(|r| r.pattern.unify(g, action).map(|b| (r, b)))
    }
}

/// Why a primitive was not applied.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Violation {
    Predicate(GroundPredicate),
    /// Effects would have broken a graph invariant.
    Integrity(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Predicate(p) => p.fmt(f),
            Self::Integrity(reason) => write!(f, "integrity: {reason}"),
        }
    }
}

impl FromStr for Violation {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("integrity: ") {
            Some(reason) => Ok(Self::Integrity(reason.to_string())),
            None => s.parse().map(Self::Predicate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Feedback {
    Success,
    Fail { violated: Violation },
    NoRule,
}

impl Feedback {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Success)
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Success => f.write_str("success"),
            Self::Fail { violated } => write!(f, "fail({violated})"),
            Self::NoRule => f.write_str("no_rule"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
enum FeedbackDoc {
    Success,
    Fail { violated: String },
    NoRule,
}

impl Serialize for Feedback {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Success => FeedbackDoc::Success,
            Self::Fail { violated } => FeedbackDoc::Fail {
                violated: violated.to_string(),
            },
            Self::NoRule => FeedbackDoc::NoRule,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Feedback {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match FeedbackDoc::deserialize(d)? {
            FeedbackDoc::Success => Self::Success,
            FeedbackDoc::NoRule => Self::NoRule,
            FeedbackDoc::Fail { violated } => Self::Fail {
                violated: violated.parse().map_err(serde::de::Error::custom)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule `{rule}`: variable `{var}` is never bound")]
    UnboundVariable { rule: String, var: String },
    #[error("rule `{rule}`: {reason}")]
    EffectIntegrity { rule: String, reason: String },
}

/// Checks preconditions in authored order. Variables first seen in a
/// predicate are bound by searching instances in id order; the first
/// assignment satisfying the predicate wins.
///
/// Returns the completed binding, or the first violated predicate.
pub fn check_preconditions(
    rule: &WorldRule,
    g: &WorldGraph,
    binding: &Binding,
) -> Result<Result<Binding, GroundPredicate>, RuleError> {
    let mut binding = binding.clone();
    for pred in &rule.preconditions {
        let unbound: Vec<&Term> = pred
            .terms()
            .into_iter()
            .filter(|t| t.var_name().is_some_and(|n| !binding.contains_key(n)))
            .collect();
        if unbound.is_empty() {
            if !pred.holds(g, &binding).expect("all terms bound") {
                return Ok(Err(pred.ground(g, &binding)));
            }
            continue;
        }
        match search(pred, g, &binding, &unbound) {
            Some(b) => binding = b,
            None => return Ok(Err(pred.ground(g, &binding))),
        }
    }
    for effect in &rule.effects {
        for t in effect.terms() {
            if let Some(var) = t.var_name() {
                if !binding.contains_key(var) {
                    return Err(RuleError::UnboundVariable {
                        rule: rule.rule_id.clone(),
                        var: var.to_string(),
                    });
                }
            }
        }
    }
    Ok(Ok(binding))
}

fn search(pred: &Predicate, g: &WorldGraph, binding: &Binding, unbound: &[&Term]) -> Option<Binding> {
    let Some((first, rest)) = unbound.split_first() else {
        return pred.holds(g, binding).unwrap_or(false).then(|| binding.clone());
    };
    let Term::Var { name, label } = first else {
        unreachable!("only variables are unbound")
    };
    if binding.contains_key(name) {
        return search(pred, g, binding, rest);
    }
    g.nodes()
        .filter(|n| label.as_deref().is_none_or(|l| label_matches(g, &n.instance_id, l)))
        .find_map(|n| {
            let mut b = binding.clone();
            b.insert(name.clone(), n.instance_id.clone());
            search(pred, g, &b, rest)
        })
}

/// Grounds a rule's effects under a complete binding.
pub fn ground_rule(g: &WorldGraph, rule: &WorldRule, binding: &Binding) -> Result<EffectSet, RuleError> {
    ground_effects(g, &rule.effects, binding).map_err(|reason| RuleError::EffectIntegrity {
        rule: rule.rule_id.clone(),
        reason,
    })
}

/// Applies the grounded effects; the step counter advances.
pub fn apply_rule(g: &WorldGraph, rule: &WorldRule, binding: &Binding) -> Result<WorldGraph, RuleError> {
    let set = ground_rule(g, rule, binding)?;
    apply_effect_set(g, &set).map_err(|reason| RuleError::EffectIntegrity {
        rule: rule.rule_id.clone(),
        reason,
    })
}

/// Outcome of one primitive, including the grounded footprint on success.
#[derive(Debug, Clone)]
pub struct Execution {
    pub feedback: Feedback,
    pub rule_id: Option<String>,
    pub effects: Option<EffectSet>,
}

/// Matches, checks and applies. On anything but success `g` is left untouched.
pub fn execute_in_place(g: &mut WorldGraph, rules: &RuleBase, action: &PrimitiveAction) -> Execution {
    let Some((rule, binding)) = rules.match_rule(g, action) else {
        return Execution {
            feedback: Feedback::NoRule,
            rule_id: None,
            effects: None,
        };
    };
    let fail = |violated: Violation| Execution {
        feedback: Feedback::Fail { violated },
        rule_id: Some(rule.rule_id.clone()),
        effects: None,
    };
    let binding = match check_preconditions(rule, g, &binding) {
        Ok(Ok(b)) => b,
        Ok(Err(p)) => return fail(Violation::Predicate(p)),
        Err(e) => return fail(Violation::Integrity(e.to_string())),
    };
    let set = match ground_rule(g, rule, &binding) {
        Ok(s) => s,
        Err(RuleError::EffectIntegrity { reason, .. }) => return fail(Violation::Integrity(reason)),
        Err(e) => return fail(Violation::Integrity(e.to_string())),
    };
    match apply_effect_set(g, &set) {
        Ok(next) => {
            *g = next;
            Execution {
                feedback: Feedback::Success,
                rule_id: Some(rule.rule_id.clone()),
                effects: Some(set),
            }
        }
        Err(reason) => fail(Violation::Integrity(reason)),
    }
}

/// Functional form of [`execute_in_place`].
pub fn execute_primitive(g: &WorldGraph, rules: &RuleBase, action: &PrimitiveAction) -> (WorldGraph, Feedback) {
    let mut next = g.clone();
    let exec = execute_in_place(&mut next, rules, action);
    (next, exec.feedback)
}
