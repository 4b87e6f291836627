//! Atomic predicates over the world graph and the agent body.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::term::{Binding, Term};
use crate::graph::{Hand, Relation, Slot, WorldGraph};
use crate::syntax::{Call, SyntaxError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HandSel {
    Left,
    Right,
    Any,
}

impl HandSel {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Self::Left),
            "right" => Some(Self::Right),
            "any" => Some(Self::Any),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
            Self::Any => "any",
        }
    }

    fn hands(self) -> &'static [Hand] {
        match self {
            Self::Left => &[Hand::Left],
            Self::Right => &[Hand::Right],
            Self::Any => &[Hand::Right, Hand::Left],
        }
    }
}

/// Precondition predicate as authored, over terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// `at(o, area)`
    At { object: Term, area: Term },
    /// `state(o, v)` or `state(o, key=v)`
    State { object: Term, slot: Slot, value: String },
    /// `contains(c, o)`
    Contains { container: Term, item: Term },
    /// `agent_at(area)`
    AgentAt { area: Term },
    /// `hand(left|right|any, o|empty)`; `None` content means empty.
    Hand { hand: HandSel, content: Option<Term> },
}

fn split_slot_arg(arg: &str) -> (Slot, String) {
    match arg.split_once('=') {
        Some((k, v)) => (Slot::from_key(k), v.to_string()),
        None => (Slot::State, arg.to_string()),
    }
}

fn render_slot_value(slot: &Slot, value: &str) -> String {
    match slot {
        Slot::State => value.to_string(),
        Slot::Flag(k) => format!("{k}={value}"),
        other => format!("{other}={value}"),
    }
}

impl Predicate {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let call = Call::parse(text)?;
        let bad = |reason: &str| SyntaxError {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let a = &call.args;
        match (call.name.as_str(), a.len()) {
            ("at", 2) => Ok(Self::At {
                object: Term::parse(&a[0]),
                area: Term::parse(&a[1]),
            }),
            ("state", 2) => {
                let (slot, value) = split_slot_arg(&a[1]);
                if slot == Slot::Location {
                    return Err(bad("use at(o, area) for locations"));
                }
                Ok(Self::State {
                    object: Term::parse(&a[0]),
                    slot,
                    value,
                })
            }
            ("contains", 2) => Ok(Self::Contains {
                container: Term::parse(&a[0]),
                item: Term::parse(&a[1]),
            }),
            ("agent_at", 1) => Ok(Self::AgentAt {
                area: Term::parse(&a[0]),
            }),
            ("hand", 2) => {
                let hand = HandSel::parse(&a[0]).ok_or_else(|| bad("hand must be left|right|any"))?;
                let content = (a[1] != "empty").then(|| Term::parse(&a[1]));
                Ok(Self::Hand { hand, content })
            }
            (name, n) => Err(bad(&format!("unknown predicate `{name}`/{n}"))),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Self::At { object, area } => vec![object, area],
            Self::State { object, .. } => vec![object],
            Self::Contains { container, item } => vec![container, item],
            Self::AgentAt { area } => vec![area],
            Self::Hand { content, .. } => content.iter().collect(),
        }
    }

    /// Evaluates under a binding; `None` if a variable is unbound.
    pub fn holds(&self, g: &WorldGraph, binding: &Binding) -> Option<bool> {
        Some(match self {
            Self::At { object, area } => {
                let o = object.resolve(binding, g)?;
                let l = area.resolve(binding, g)?;
                g.slot_value(&o, &Slot::Location).as_deref() == Some(l.as_str())
            }
            Self::State { object, slot, value } => {
                let o = object.resolve(binding, g)?;
                g.slot_value(&o, slot).as_deref() == Some(value.as_str())
            }
            Self::Contains { container, item } => {
                let c = container.resolve(binding, g)?;
                let o = item.resolve(binding, g)?;
                g.has_edge(&c, Relation::Contains, &o)
            }
            Self::AgentAt { area } => {
                let l = area.resolve(binding, g)?;
                g.agent().current_area == l
            }
            Self::Hand { hand, content } => {
                let want = match content {
                    Some(t) => Some(t.resolve(binding, g)?),
                    None => None,
                };
                hand.hands().iter().any(|h| g.agent().hand(*h) == want.as_deref())
            }
        })
    }

    /// Grounds for reporting; unbound variables render as their label.
    pub fn ground(&self, g: &WorldGraph, binding: &Binding) -> GroundPredicate {
        let d = |t: &Term| t.describe(binding, g);
        match self {
            Self::At { object, area } => GroundPredicate::At {
                object: d(object),
                area: d(area),
            },
            Self::State { object, slot, value } => GroundPredicate::State {
                object: d(object),
                slot: slot.clone(),
                value: value.clone(),
            },
            Self::Contains { container, item } => GroundPredicate::Contains {
                container: d(container),
                item: d(item),
            },
            Self::AgentAt { area } => GroundPredicate::AgentAt { area: d(area) },
            Self::Hand { hand, content } => GroundPredicate::Hand {
                hand: *hand,
                content: content.as_ref().map(d),
            },
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::At { object, area } => write!(f, "at({object}, {area})"),
            Self::State { object, slot, value } => {
                write!(f, "state({object}, {})", render_slot_value(slot, value))
            }
            Self::Contains { container, item } => write!(f, "contains({container}, {item})"),
            Self::AgentAt { area } => write!(f, "agent_at({area})"),
            Self::Hand { hand, content } => match content {
                Some(t) => write!(f, "hand({}, {t})", hand.as_str()),
                None => write!(f, "hand({}, empty)", hand.as_str()),
            },
        }
    }
}

/// Fully grounded predicate, as carried by failure feedback.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroundPredicate {
    At { object: String, area: String },
    State { object: String, slot: Slot, value: String },
    Contains { container: String, item: String },
    AgentAt { area: String },
    Hand { hand: HandSel, content: Option<String> },
}

impl GroundPredicate {
    /// Instance ids named by the predicate (possibly labels for unbound variables).
    pub fn subjects(&self) -> Vec<&str> {
        match self {
            Self::At { object, .. } | Self::State { object, .. } => vec![object],
            Self::Contains { container, item } => vec![container, item],
            Self::AgentAt { .. } => vec![],
            Self::Hand { content, .. } => content.iter().map(String::as_str).collect(),
        }
    }
}

impl fmt::Display for GroundPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::At { object, area } => write!(f, "at({object}, {area})"),
            Self::State { object, slot, value } => {
                write!(f, "state({object}, {})", render_slot_value(slot, value))
            }
            Self::Contains { container, item } => write!(f, "contains({container}, {item})"),
            Self::AgentAt { area } => write!(f, "agent_at({area})"),
            Self::Hand { hand, content } => {
                write!(f, "hand({}, {})", hand.as_str(), content.as_deref().unwrap_or("empty"))
            }
        }
    }
}

impl FromStr for GroundPredicate {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lit = |t: &Term| match t {
            Term::Lit(v) => Ok(v.clone()),
            Term::Here => Ok("here".to_string()),
            Term::Var { .. } => Err(SyntaxError {
                text: s.to_string(),
                reason: "grounded predicate contains a variable".into(),
            }),
        };
        Ok(match Predicate::parse(s)? {
            Predicate::At { object, area } => Self::At {
                object: lit(&object)?,
                area: lit(&area)?,
            },
            Predicate::State { object, slot, value } => Self::State {
                object: lit(&object)?,
                slot,
                value,
            },
            Predicate::Contains { container, item } => Self::Contains {
                container: lit(&container)?,
                item: lit(&item)?,
            },
            Predicate::AgentAt { area } => Self::AgentAt { area: lit(&area)? },
            Predicate::Hand { hand, content } => Self::Hand {
                hand,
                content: content.as_ref().map(lit).transpose()?,
            },
        })
    }
}

impl Serialize for GroundPredicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroundPredicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}
