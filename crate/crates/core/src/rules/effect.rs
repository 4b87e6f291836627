//! Authored effect statements and their grounded footprint.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::term::{Binding, Term};
use crate::graph::{Edge, Hand, Node, NodeKind, Relation, Slot, WorldGraph};
use crate::syntax::{Call, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    /// Inside a container: inherits its location, adds `contains`.
    In(Term),
    /// On a supporter: inherits its location, adds `supports`.
    On(Term),
    /// Directly in an area (or the area of the named object).
    At(Term),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Set {
        target: Term,
        slot: Slot,
        value: String,
    },
    Unset {
        target: Term,
        slot: Slot,
    },
    Add {
        /// Literal id; `#` is replaced by the smallest free two-digit counter.
        id: String,
        label: String,
        kind: NodeKind,
        placement: Placement,
        slots: Vec<(Slot, String)>,
    },
    Remove {
        target: Term,
    },
    Link {
        src: Term,
        relation: Relation,
        dst: Term,
    },
    Unlink {
        src: Term,
        relation: Relation,
        dst: Term,
    },
    /// Drops every `contains`/`supports` edge pointing at the target.
    Detach {
        target: Term,
    },
    Grab {
        target: Term,
    },
    Release {
        target: Term,
    },
    MoveAgent {
        area: Term,
    },
}

impl Effect {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let call = Call::parse(text)?;
        let bad = |reason: String| SyntaxError {
            text: text.to_string(),
            reason,
        };
        let a = &call.args;
        let rel = |s: &str| s.parse::<Relation>().map_err(bad);
        match (call.name.as_str(), a.len()) {
            ("set", 2) => {
                let (k, v) = a[1].split_once('=').map_or(("state", a[1].as_str()), |(k, v)| (k, v));
                Ok(Self::Set {
                    target: Term::parse(&a[0]),
                    slot: Slot::from_key(k),
                    value: v.to_string(),
                })
            }
            ("unset", 2) => Ok(Self::Unset {
                target: Term::parse(&a[0]),
                slot: Slot::from_key(&a[1]),
            }),
            ("add", n) if n >= 4 => {
                let kind = a[2].parse::<NodeKind>().map_err(bad)?;
                if kind == NodeKind::Area {
                    return Err(bad("rules cannot add areas".into()));
                }
                let mut placement = None;
                let mut slots = Vec::new();
                for opt in &a[3..] {
                    let Some((k, v)) = opt.split_once('=') else {
                        return Err(bad(format!("add option `{opt}` must be key=value")));
                    };
                    let p = match k {
                        "in" => Some(Placement::In(Term::parse(v))),
                        "on" => Some(Placement::On(Term::parse(v))),
                        "at" => Some(Placement::At(Term::parse(v))),
                        _ => {
                            let slot = Slot::from_key(k);
                            if slot == Slot::Location {
                                return Err(bad("use at= for location".into()));
                            }
                            slots.push((slot, v.to_string()));
                            None
                        }
                    };
                    if let Some(p) = p {
                        if placement.replace(p).is_some() {
                            return Err(bad("more than one placement".into()));
                        }
                    }
                }
                Ok(Self::Add {
                    id: a[0].clone(),
                    label: a[1].clone(),
                    kind,
                    placement: placement.ok_or_else(|| bad("add needs in=, on= or at=".into()))?,
                    slots,
                })
            }
            ("remove", 1) => Ok(Self::Remove {
                target: Term::parse(&a[0]),
            }),
            ("link", 3) => Ok(Self::Link {
                src: Term::parse(&a[0]),
                relation: rel(&a[1])?,
                dst: Term::parse(&a[2]),
            }),
            ("unlink", 3) => Ok(Self::Unlink {
                src: Term::parse(&a[0]),
                relation: rel(&a[1])?,
                dst: Term::parse(&a[2]),
            }),
            ("detach", 1) => Ok(Self::Detach {
                target: Term::parse(&a[0]),
            }),
            ("grab", 1) => Ok(Self::Grab {
                target: Term::parse(&a[0]),
            }),
            ("release", 1) => Ok(Self::Release {
                target: Term::parse(&a[0]),
            }),
            ("move_agent", 1) => Ok(Self::MoveAgent {
                area: Term::parse(&a[0]),
            }),
            (name, n) => Err(bad(format!("unknown effect `{name}`/{n}"))),
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Self::Set { target, .. }
            | Self::Unset { target, .. }
            | Self::Remove { target }
            | Self::Detach { target }
            | Self::Grab { target }
            | Self::Release { target } => vec![target],
            Self::Add { placement, .. } => match placement {
                Placement::In(t) | Placement::On(t) | Placement::At(t) => vec![t],
            },
            Self::Link { src, dst, .. } | Self::Unlink { src, dst, .. } => vec![src, dst],
            Self::MoveAgent { area } => vec![area],
        }
    }

    /// Values this effect can write into node slots, for vocabulary checks.
    pub fn written_values(&self) -> Vec<(Slot, &str)> {
        match self {
            Self::Set { slot, value, .. } if *slot != Slot::Location => vec![(slot.clone(), value.as_str())],
            Self::Add { slots, .. } => slots.iter().map(|(s, v)| (s.clone(), v.as_str())).collect(),
            _ => vec![],
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Set { target, slot, value } => match slot {
                Slot::State => write!(f, "set({target}, {value})"),
                Slot::Flag(k) => write!(f, "set({target}, {k}={value})"),
                other => write!(f, "set({target}, {other}={value})"),
            },
            Self::Unset { target, slot } => write!(f, "unset({target}, {slot})"),
            Self::Add {
                id,
                label,
                kind,
                placement,
                slots,
            } => {
                let kind = serde_json::to_value(kind)
                    .expect("kind")
                    .as_str()
                    .unwrap_or("")
                    .to_string();
                write!(f, "add({id}, {label}, {kind}, ")?;
                match placement {
                    Placement::In(t) => write!(f, "in={t}")?,
                    Placement::On(t) => write!(f, "on={t}")?,
                    Placement::At(t) => write!(f, "at={t}")?,
                }
                for (s, v) in slots {
                    match s {
                        Slot::Flag(k) => write!(f, ", {k}={v}")?,
                        other => write!(f, ", {other}={v}")?,
                    }
                }
                f.write_str(")")
            }
            Self::Remove { target } => write!(f, "remove({target})"),
            Self::Link { src, relation, dst } => write!(f, "link({src}, {}, {dst})", relation.as_str()),
            Self::Unlink { src, relation, dst } => write!(f, "unlink({src}, {}, {dst})", relation.as_str()),
            Self::Detach { target } => write!(f, "detach({target})"),
            Self::Grab { target } => write!(f, "grab({target})"),
            Self::Release { target } => write!(f, "release({target})"),
            Self::MoveAgent { area } => write!(f, "move_agent({area})"),
        }
    }
}

/// Net graph mutation produced by firing a rule under a binding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectSet {
    pub node_add: Vec<Node>,
    pub node_remove: BTreeSet<String>,
    pub edge_add: BTreeSet<Edge>,
    pub edge_remove: BTreeSet<Edge>,
    /// `None` clears the slot.
    pub attr_updates: BTreeMap<String, BTreeMap<Slot, Option<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_area: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub hand_updates: BTreeMap<Hand, Option<String>>,
}

impl EffectSet {
    pub fn is_empty(&self) -> bool {
        self.node_add.is_empty()
            && self.node_remove.is_empty()
            && self.edge_add.is_empty()
            && self.edge_remove.is_empty()
            && self.attr_updates.is_empty()
            && self.agent_area.is_none()
            && self.hand_updates.is_empty()
    }

    /// Net change between two snapshots of the same lineage.
    pub fn between(before: &WorldGraph, after: &WorldGraph) -> Self {
        let mut set = EffectSet::default();
        for n in after.nodes() {
            match before.lookup_instance(&n.instance_id) {
                None => set.node_add.push(n.clone()),
                Some(old) => {
                    let mut slots: BTreeSet<Slot> = old.slots().into_iter().map(|(s, _)| s).collect();
                    slots.extend(n.slots().into_iter().map(|(s, _)| s));
                    for slot in slots {
                        let new = n.slot(&slot);
                        if old.slot(&slot) != new {
                            set.attr_updates
                                .entry(n.instance_id.clone())
                                .or_default()
                                .insert(slot, new);
                        }
                    }
                }
            }
        }
        for n in before.nodes() {
            if after.lookup_instance(&n.instance_id).is_none() {
                set.node_remove.insert(n.instance_id.clone());
            }
        }
        set.edge_add = after.edges().difference(before.edges()).cloned().collect();
        set.edge_remove = before.edges().difference(after.edges()).cloned().collect();
        let (a, b) = (before.agent(), after.agent());
        if a.current_area != b.current_area {
            set.agent_area = Some(b.current_area.clone());
        }
        for h in [Hand::Left, Hand::Right] {
            if a.hand(h) != b.hand(h) {
                set.hand_updates.insert(h, b.hand(h).map(str::to_string));
            }
        }
        set
    }
}

/// Applies a grounded effect set, then re-validates every graph invariant.
pub fn apply_effect_set(g: &WorldGraph, set: &EffectSet) -> Result<WorldGraph, String> {
    let mut out = g.clone();
    for id in &set.node_remove {
        if out.nodes_mut().remove(id).is_none() {
            return Err(format!("cannot remove missing node `{id}`"));
        }
    }
    for n in &set.node_add {
        if set.node_remove.contains(&n.instance_id) {
            return Err(format!("`{}` both added and removed", n.instance_id));
        }
        if out.nodes_mut().insert(n.instance_id.clone(), n.clone()).is_some() {
            return Err(format!("node `{}` already exists", n.instance_id));
        }
    }
    for e in &set.edge_remove {
        out.edges_mut().remove(e);
    }
    for e in &set.edge_add {
        out.edges_mut().insert(e.clone());
    }
    for (id, slots) in &set.attr_updates {
        let node = out
            .nodes_mut()
            .get_mut(id)
            .ok_or_else(|| format!("attribute update on missing node `{id}`"))?;
        for (slot, value) in slots {
            node.set_slot(slot, value.clone())?;
        }
    }
    if let Some(area) = &set.agent_area {
        out.agent_mut().current_area = area.clone();
    }
    for (h, content) in &set.hand_updates {
        out.agent_mut().set_hand(*h, content.clone());
    }
    out.bump_step();
    out.validate().map_err(|e| e.to_string())?;
    Ok(out)
}

/// Fires `effects` sequentially on a scratch copy and returns the net footprint.
pub(crate) fn ground_effects(g: &WorldGraph, effects: &[Effect], binding: &Binding) -> Result<EffectSet, String> {
    let mut work = g.clone();
    for effect in effects {
        step(&mut work, effect, binding)?;
    }
    work.validate().map_err(|e| e.to_string())?;
    Ok(EffectSet::between(g, &work))
}

fn resolve(t: &Term, binding: &Binding, g: &WorldGraph) -> Result<String, String> {
    t.resolve(binding, g).ok_or_else(|| format!("unbound variable `{t}`"))
}

fn existing(g: &WorldGraph, id: &str) -> Result<(), String> {
    if g.lookup_instance(id).is_some() {
        Ok(())
    } else {
        Err(format!("unknown instance `{id}`"))
    }
}

fn move_with_contents(g: &mut WorldGraph, id: &str, area: &str) -> Result<(), String> {
    if !g.is_area(area) {
        return Err(format!("`{area}` is not an area"));
    }
    let mut ids = g.dependents(id);
    ids.push(id.to_string());
    for i in ids {
        if let Some(n) = g.nodes_mut().get_mut(&i) {
            n.location = Some(area.to_string());
        }
    }
    Ok(())
}

fn step(g: &mut WorldGraph, effect: &Effect, binding: &Binding) -> Result<(), String> {
    match effect {
        Effect::Set { target, slot, value } => {
            let id = resolve(target, binding, g)?;
            existing(g, &id)?;
            if *slot == Slot::Location {
                let area = Term::parse(value).resolve(binding, g).ok_or("unbound location")?;
                return move_with_contents(g, &id, &area);
            }
            g.nodes_mut()
                .get_mut(&id)
                .expect("checked")
                .set_slot(slot, Some(value.clone()))
        }
        Effect::Unset { target, slot } => {
            let id = resolve(target, binding, g)?;
            existing(g, &id)?;
            g.nodes_mut().get_mut(&id).expect("checked").set_slot(slot, None)
        }
        Effect::Add {
            id,
            label,
            kind,
            placement,
            slots,
        } => {
            let id = fresh_id(g, id)?;
            let (anchor, edge) = match placement {
                Placement::In(t) => {
                    let c = resolve(t, binding, g)?;
                    (c.clone(), Some(Edge::new(c, Relation::Contains, id.clone())))
                }
                Placement::On(t) => {
                    let s = resolve(t, binding, g)?;
                    (s.clone(), Some(Edge::new(s, Relation::Supports, id.clone())))
                }
                Placement::At(t) => (resolve(t, binding, g)?, None),
            };
            let location = if g.is_area(&anchor) {
                anchor
            } else {
                g.slot_value(&anchor, &Slot::Location)
                    .ok_or_else(|| format!("cannot place relative to `{anchor}`"))?
            };
            let mut node = Node::object(id.clone(), label.clone(), location).with_kind(*kind);
            for (slot, value) in slots {
                node.set_slot(slot, Some(value.clone()))?;
            }
            g.nodes_mut().insert(id, node);
            if let Some(e) = edge {
                g.edges_mut().insert(e);
            }
            Ok(())
        }
        Effect::Remove { target } => {
            let id = resolve(target, binding, g)?;
            existing(g, &id)?;
            if g.is_area(&id) {
                return Err(format!("cannot remove area `{id}`"));
            }
            g.nodes_mut().remove(&id);
            g.edges_mut().retain(|e| e.src != id && e.dst != id);
            if let Some(h) = g.agent().holds(&id) {
                g.agent_mut().set_hand(h, None);
            }
            Ok(())
        }
        Effect::Link { src, relation, dst } => {
            let (s, d) = (resolve(src, binding, g)?, resolve(dst, binding, g)?);
            existing(g, &s)?;
            existing(g, &d)?;
            g.edges_mut().insert(Edge::new(s, *relation, d));
            Ok(())
        }
        Effect::Unlink { src, relation, dst } => {
            let (s, d) = (resolve(src, binding, g)?, resolve(dst, binding, g)?);
            g.edges_mut().remove(&Edge::new(s, *relation, d));
            Ok(())
        }
        Effect::Detach { target } => {
            let id = resolve(target, binding, g)?;
            g.edges_mut()
                .retain(|e| !(e.dst == id && matches!(e.relation, Relation::Contains | Relation::Supports)));
            Ok(())
        }
        Effect::Grab { target } => {
            let id = resolve(target, binding, g)?;
            existing(g, &id)?;
            if g.agent().holds(&id).is_some() {
                return Err(format!("`{id}` already held"));
            }
            let hand = g.agent().free_hand().ok_or("both hands full")?;
            g.agent_mut().set_hand(hand, Some(id));
            Ok(())
        }
        Effect::Release { target } => {
            let id = resolve(target, binding, g)?;
            let hand = g.agent().holds(&id).ok_or_else(|| format!("`{id}` is not held"))?;
            g.agent_mut().set_hand(hand, None);
            Ok(())
        }
        Effect::MoveAgent { area } => {
            let area = resolve(area, binding, g)?;
            if !g.is_area(&area) {
                return Err(format!("`{area}` is not an area"));
            }
            g.agent_mut().current_area = area.clone();
            let held: Vec<String> = g.agent().held().map(str::to_string).collect();
            for h in held {
                move_with_contents(g, &h, &area)?;
            }
            Ok(())
        }
    }
}

fn fresh_id(g: &WorldGraph, template: &str) -> Result<String, String> {
    if !template.contains('#') {
        return if g.lookup_instance(template).is_some() {
            Err(format!("node `{template}` already exists"))
        } else {
            Ok(template.to_string())
        };
    }
    (1..1000)
        .map(|n| template.replacen('#', &format!("{n:02}"), 1))
        .find(|id| g.lookup_instance(id).is_none())
        .ok_or_else(|| format!("no free id for `{template}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn effect_syntax_round_trips() {
        for text in [
            "set(?m, open)",
            "set(?m, loaded=true)",
            "set(?x, amount=partial)",
            "set(?x, location=here)",
            "unset(?m, state.brewing)",
            "add(brewed_coffee_#, brewed_coffee, substance, in=?cup, amount=full)",
            "remove(?c)",
            "link(?m, contains, ?c)",
            "unlink(?m, contains, ?c)",
            "detach(?c)",
            "grab(?c)",
            "release(?c)",
            "move_agent(?a)",
        ] {
            assert_eq!(Effect::parse(text).unwrap().to_string(), text, "{text}");
        }
        assert!(Effect::parse("add(x, y, area, at=here)").is_err());
        assert!(Effect::parse("add(x, y, object)").is_err());
        assert!(Effect::parse("explode(?x)").is_err());
    }
}
