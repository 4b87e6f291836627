use std::collections::BTreeMap;
use std::fmt;

use crate::graph::WorldGraph;

/// Variable assignment produced by pattern unification and precondition search.
pub type Binding = BTreeMap<String, String>;

/// Argument of a rule pattern, predicate or effect.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// `?name` or `?name:label`; the label constrains candidates at a binding site.
    Var {
        name: String,
        label: Option<String>,
    },
    /// The agent's current area.
    Here,
    Lit(String),
}

impl Term {
    pub fn parse(token: &str) -> Self {
        if let Some(rest) = token.strip_prefix('?') {
            match rest.split_once(':') {
                Some((name, label)) => Term::Var {
                    name: name.to_string(),
                    label: Some(label.to_string()),
                },
                None => Term::Var {
                    name: rest.to_string(),
                    label: None,
                },
            }
        } else if token == "here" {
            Term::Here
        } else {
            Term::Lit(token.to_string())
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Var { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Resolves against a binding; `None` for unbound variables.
    pub fn resolve(&self, binding: &Binding, g: &WorldGraph) -> Option<String> {
        match self {
            Term::Var { name, .. } => binding.get(name).cloned(),
            Term::Here => Some(g.agent().current_area.clone()),
            Term::Lit(s) => Some(s.clone()),
        }
    }

    /// Human-facing rendering when the term could not be resolved: the label
    /// constraint if any, else the variable name.
    pub fn describe(&self, binding: &Binding, g: &WorldGraph) -> String {
        match self.resolve(binding, g) {
            Some(v) => v,
            None => match self {
                Term::Var { label: Some(l), .. } => l.clone(),
                Term::Var { name, .. } => name.clone(),
                _ => unreachable!("non-variables always resolve"),
            },
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var { name, label: None } => write!(f, "?{name}"),
            Term::Var { name, label: Some(l) } => write!(f, "?{name}:{l}"),
            Term::Here => f.write_str("here"),
            Term::Lit(s) => f.write_str(s),
        }
    }
}

/// Does node `id` satisfy a label constraint? The pseudo-label `area` matches area nodes.
pub(crate) fn label_matches(g: &WorldGraph, id: &str, label: &str) -> bool {
    match g.lookup_instance(id) {
        Some(n) if label == "area" => n.kind == crate::graph::NodeKind::Area,
        Some(n) => n.label == label,
        None => false,
    }
}
