//! Restricted views of the hidden world: per-area local subgraphs, symbolic
//! diffs against the episode start, and their textual rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Node, NodeKind, Relation, Slot, WorldGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservationError {
    #[error("unknown area `{0}`")]
    UnknownArea(String),
}

/// A subgraph: nodes plus the edges among them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphView {
    pub nodes: BTreeMap<String, Node>,
    pub edges: BTreeSet<Edge>,
}

impl GraphView {
    /// Every node and edge, no occlusion.
    pub fn whole(g: &WorldGraph) -> Self {
        Self {
            nodes: g.nodes().map(|n| (n.instance_id.clone(), n.clone())).collect(),
            edges: g.edges().clone(),
        }
    }

    pub fn objects(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind != NodeKind::Area)
    }
}

/// Ids hidden inside a closed container, transitively.
fn occluded(g: &WorldGraph) -> BTreeSet<String> {
    let mut hidden = BTreeSet::new();
    for node in g.nodes() {
        if node.state.as_deref() == Some("closed") {
            let mut stack = vec![node.instance_id.clone()];
            while let Some(cur) = stack.pop() {
                for e in g.edges() {
                    if e.src == cur && e.relation == Relation::Contains && hidden.insert(e.dst.clone()) {
                        stack.push(e.dst.clone());
                    }
                }
            }
        }
    }
    hidden
}

/// The area node, every node located in `area` except contents of closed
/// containers, and the edges among them.
pub fn local_subgraph(g: &WorldGraph, area: &str) -> Result<GraphView, ObservationError> {
    let area_node = g
        .lookup_instance(area)
        .filter(|n| n.kind == NodeKind::Area)
        .ok_or_else(|| ObservationError::UnknownArea(area.to_string()))?;
    let hidden = occluded(g);
    let mut nodes = BTreeMap::new();
    nodes.insert(area.to_string(), area_node.clone());
    for n in g.objects() {
        if n.location.as_deref() == Some(area) && !hidden.contains(&n.instance_id) {
            nodes.insert(n.instance_id.clone(), n.clone());
        }
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| nodes.contains_key(&e.src) && nodes.contains_key(&e.dst))
        .cloned()
        .collect();
    Ok(GraphView { nodes, edges })
}

/// Local subgraph of `area` ignoring closed-container occlusion.
pub fn unoccluded_subgraph(g: &WorldGraph, area: &str) -> Result<GraphView, ObservationError> {
    let area_node = g
        .lookup_instance(area)
        .filter(|n| n.kind == NodeKind::Area)
        .ok_or_else(|| ObservationError::UnknownArea(area.to_string()))?;
    let mut nodes = BTreeMap::new();
    nodes.insert(area.to_string(), area_node.clone());
    for n in g.objects() {
        if n.location.as_deref() == Some(area) {
            nodes.insert(n.instance_id.clone(), n.clone());
        }
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| nodes.contains_key(&e.src) && nodes.contains_key(&e.dst))
        .cloned()
        .collect();
    Ok(GraphView { nodes, edges })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttrChange {
    pub instance_id: String,
    pub slot: Slot,
    pub old: Option<String>,
    pub new: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeChangeKind {
    Added,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeChange {
    pub edge: Edge,
    pub change: EdgeChangeKind,
}

/// Symbolic difference between two views.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSet {
    pub changed_attrs: Vec<AttrChange>,
    pub appeared: Vec<Node>,
    pub disappeared: Vec<String>,
    pub edge_changes: Vec<EdgeChange>,
}

impl DeltaSet {
    pub fn is_empty(&self) -> bool {
        self.changed_attrs.is_empty()
            && self.appeared.is_empty()
            && self.disappeared.is_empty()
            && self.edge_changes.is_empty()
    }

    /// Every instance id the delta mentions.
    pub fn mentioned_ids(&self) -> BTreeSet<&str> {
        let mut ids: BTreeSet<&str> = self.changed_attrs.iter().map(|c| c.instance_id.as_str()).collect();
        ids.extend(self.appeared.iter().map(|n| n.instance_id.as_str()));
        ids.extend(self.disappeared.iter().map(String::as_str));
        for c in &self.edge_changes {
            ids.insert(&c.edge.src);
            ids.insert(&c.edge.dst);
        }
        ids
    }
}

/// Diff of two views; entries are sorted by instance id then slot.
pub fn diff_views(before: &GraphView, after: &GraphView) -> DeltaSet {
    let mut delta = DeltaSet::default();
    for (id, new_node) in &after.nodes {
        match before.nodes.get(id) {
            None => delta.appeared.push(new_node.clone()),
            Some(old_node) => {
                let mut slots: BTreeSet<Slot> = old_node.slots().into_iter().map(|(s, _)| s).collect();
                slots.extend(new_node.slots().into_iter().map(|(s, _)| s));
                for slot in slots {
                    let (old, new) = (old_node.slot(&slot), new_node.slot(&slot));
                    if old != new {
                        delta.changed_attrs.push(AttrChange {
                            instance_id: id.clone(),
                            slot,
                            old,
                            new,
                        });
                    }
                }
            }
        }
    }
    delta.disappeared = before
        .nodes
        .keys()
        .filter(|id| !after.nodes.contains_key(*id))
        .cloned()
        .collect();
    for e in after.edges.difference(&before.edges) {
        delta.edge_changes.push(EdgeChange {
            edge: e.clone(),
            change: EdgeChangeKind::Added,
        });
    }
    for e in before.edges.difference(&after.edges) {
        delta.edge_changes.push(EdgeChange {
            edge: e.clone(),
            change: EdgeChangeKind::Removed,
        });
    }
    delta.edge_changes.sort();
    delta
}

/// Diff of the two graphs' local subgraphs of `area`.
pub fn graph_diff(g_a: &WorldGraph, g_b: &WorldGraph, area: &str) -> Result<DeltaSet, ObservationError> {
    Ok(diff_views(&local_subgraph(g_a, area)?, &local_subgraph(g_b, area)?))
}

/// Applies a delta to a view. Inverse of [`diff_views`]: `apply_delta(a, diff_views(a, b)) == b`.
pub fn apply_delta(view: &GraphView, delta: &DeltaSet) -> Result<GraphView, String> {
    let mut out = view.clone();
    for id in &delta.disappeared {
        out.nodes
            .remove(id)
            .ok_or_else(|| format!("disappeared `{id}` not in view"))?;
    }
    for n in &delta.appeared {
        if out.nodes.insert(n.instance_id.clone(), n.clone()).is_some() {
            return Err(format!("appeared `{}` already in view", n.instance_id));
        }
    }
    for c in &delta.changed_attrs {
        let node = out
            .nodes
            .get_mut(&c.instance_id)
            .ok_or_else(|| format!("changed `{}` not in view", c.instance_id))?;
        if node.slot(&c.slot) != c.old {
            return Err(format!("`{}` {}: stale old value", c.instance_id, c.slot));
        }
        node.set_slot(&c.slot, c.new.clone())?;
    }
    for c in &delta.edge_changes {
        match c.change {
            EdgeChangeKind::Added => out.edges.insert(c.edge.clone()),
            EdgeChangeKind::Removed => out.edges.remove(&c.edge),
        };
    }
    Ok(out)
}

fn show(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("none")
}

fn node_details(n: &Node) -> String {
    let mut parts = Vec::new();
    if n.kind != NodeKind::Object {
        parts.push(format!("kind={}", kind_name(n.kind)));
    }
    for (slot, value) in n.slots() {
        if slot != Slot::Location {
            parts.push(format!("{slot}={value}"));
        }
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" [{}]", parts.join(", "))
    }
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Area => "area",
        NodeKind::Object => "object",
        NodeKind::Substance => "substance",
        NodeKind::Product => "product",
    }
}

pub const NO_CHANGES: &str = "no changes since episode start";

/// Line-per-change rendering, ordered by instance id then slot:
///
/// ```text
/// <id>: <slot> <old> -> <new>
/// appeared: <id> (<label>) at <area> [<slot>=<value>, ...]
/// disappeared: <id>
/// <src>: <relation> <dst> added|removed
/// ```
pub fn render_diff(d: &DeltaSet) -> String {
    if d.is_empty() {
        return NO_CHANGES.to_string();
    }
    // (id, rank, tiebreak) sort key keeps the layout stable.
    let mut lines: Vec<((String, u8, String), String)> = Vec::new();
    for n in &d.appeared {
        lines.push((
            (n.instance_id.clone(), 0, String::new()),
            format!(
                "appeared: {} ({}) at {}{}",
                n.instance_id,
                n.label,
                show(&n.location),
                node_details(n)
            ),
        ));
    }
    for id in &d.disappeared {
        lines.push(((id.clone(), 1, String::new()), format!("disappeared: {id}")));
    }
    for c in &d.changed_attrs {
        lines.push((
            (c.instance_id.clone(), 2, c.slot.to_string()),
            format!("{}: {} {} -> {}", c.instance_id, c.slot, show(&c.old), show(&c.new)),
        ));
    }
    for c in &d.edge_changes {
        let verb = match c.change {
            EdgeChangeKind::Added => "added",
            EdgeChangeKind::Removed => "removed",
        };
        lines.push((
            (
                c.edge.src.clone(),
                3,
                format!("{} {}", c.edge.relation.as_str(), c.edge.dst),
            ),
            format!("{}: {} {} {verb}", c.edge.src, c.edge.relation.as_str(), c.edge.dst),
        ));
    }
    lines.sort();
    lines.into_iter().map(|(_, l)| l).collect::<Vec<_>>().join("\n")
}

/// Full current-state rendering of a view, used by the Flow interface.
pub fn render_view(area: &str, view: &GraphView) -> String {
    let mut out = format!("area: {area}");
    let objects: Vec<&Node> = view.objects().collect();
    if objects.is_empty() {
        out.push_str("\n(no visible objects)");
    }
    for n in objects {
        let _ = write!(out, "\n{} ({}){}", n.instance_id, n.label, node_details(n));
    }
    for e in &view.edges {
        let _ = write!(out, "\n{}: {} {}", e.src, e.relation.as_str(), e.dst);
    }
    out
}

/// What the agent receives after each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step: u64,
    pub area: String,
    /// Opaque reference to the area's episode-start image.
    pub image_ref: String,
    /// Symbolic content of that image: the area's episode-start local subgraph.
    pub anchor: GraphView,
    pub delta_set: DeltaSet,
    pub delta_text: String,
}

impl Observation {
    /// The area as it looks now: anchor with the delta applied.
    pub fn current_view(&self) -> GraphView {
        apply_delta(&self.anchor, &self.delta_set).expect("delta computed against this anchor")
    }
}

/// `o_t = (I_init^ℓ, Render(Diff(G_init^ℓ, G_t^ℓ)))`; the baseline is always the episode start.
pub fn observe(
    init: &WorldGraph,
    current: &WorldGraph,
    area: &str,
    image_ref: &str,
) -> Result<Observation, ObservationError> {
    let anchor = local_subgraph(init, area)?;
    let now = local_subgraph(current, area)?;
    let delta_set = diff_views(&anchor, &now);
    Ok(Observation {
        step: current.step(),
        area: area.to_string(),
        image_ref: image_ref.to_string(),
        delta_text: render_diff(&delta_set),
        anchor,
        delta_set,
    })
}
