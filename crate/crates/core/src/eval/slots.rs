//! Physical-state slots compared by WSR.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeKind, Relation, Slot, WorldGraph};

/// `(object, attribute)`; attributes are `location`, `contained_in`,
/// `supported_by`, `state`, `state.<key>` and `amount`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub object: String,
    pub attribute: String,
}

impl SlotRef {
    pub fn new(object: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self {
            object: object.into(),
            attribute: attribute.into(),
        }
    }
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.object, self.attribute)
    }
}

/// Every defined slot of every non-area node.
pub fn slot_table(g: &WorldGraph) -> BTreeMap<SlotRef, String> {
    let mut out = BTreeMap::new();
    for n in g.nodes().filter(|n| n.kind != NodeKind::Area) {
        for (slot, value) in n.slots() {
            out.insert(SlotRef::new(&n.instance_id, slot.to_string()), value);
        }
        for (attr, rel) in [
            ("contained_in", Relation::Contains),
            ("supported_by", Relation::Supports),
        ] {
            let parents = g.parents(&n.instance_id, rel);
            if !parents.is_empty() {
                out.insert(SlotRef::new(&n.instance_id, attr), parents.join(","));
            }
        }
    }
    out
}

/// Value of one slot; `None` when undefined or the object does not exist.
pub fn slot_value(g: &WorldGraph, r: &SlotRef) -> Option<String> {
    g.lookup_instance(&r.object)?;
    match r.attribute.as_str() {
        "contained_in" | "supported_by" => {
            let rel = if r.attribute == "contained_in" {
                Relation::Contains
            } else {
                Relation::Supports
            };
            let parents = g.parents(&r.object, rel);
            (!parents.is_empty()).then(|| parents.join(","))
        }
        attr => g.slot_value(&r.object, &Slot::from_key(attr)),
    }
}

/// Slots whose value differs between `before` and `after`, over the union of both tables.
pub fn changed_slots(before: &WorldGraph, after: &WorldGraph) -> BTreeSet<SlotRef> {
    let a = slot_table(before);
    let b = slot_table(after);
    a.keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect()
}
