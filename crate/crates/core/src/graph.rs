//! Hidden world state as a typed attributed graph.
//!
//! Nodes are areas, objects, substances and products. An object's `location`
//! slot carries its `located_in` relation; the explicit edge set holds the
//! structural relations (`contains`, `supports`, `functional`). Mutation is
//! crate-private and only reachable through the rule engine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const GRAPH_FORMAT: &str = "hwsim-graph/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Area,
    Object,
    Substance,
    Product,
}

impl FromStr for NodeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "area" => Ok(Self::Area),
            "object" => Ok(Self::Object),
            "substance" => Ok(Self::Substance),
            "product" => Ok(Self::Product),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amount {
    Full,
    Partial,
    Empty,
}

impl Amount {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Partial => "partial",
            Self::Empty => "empty",
        }
    }
}

impl FromStr for Amount {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Self::Full),
            "partial" => Ok(Self::Partial),
            "empty" => Ok(Self::Empty),
            other => Err(format!("amount must be full|partial|empty, got `{other}`")),
        }
    }
}

/// Structural relation kinds. `located_in` is not stored as an edge: it is
/// the node's `location` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Contains,
    Supports,
    Functional,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Contains => "contains",
            Self::Supports => "supports",
            Self::Functional => "functional",
        }
    }
}

impl FromStr for Relation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "contains" => Ok(Self::Contains),
            "supports" => Ok(Self::Supports),
            "functional" => Ok(Self::Functional),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub relation: Relation,
    pub dst: String,
}

impl Edge {
    pub fn new(src: impl Into<String>, relation: Relation, dst: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            relation,
            dst: dst.into(),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.src, self.relation.as_str(), self.dst)
    }
}

/// Attribute slot of a node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Location,
    State,
    /// Named sub-slot, written `state.<key>`.
    Flag(String),
    Amount,
}

impl Slot {
    /// Slot for a `key` as written in predicates: `state`, `amount`,
    /// `location`, `state.<k>` or a bare flag name.
    pub fn from_key(key: &str) -> Self {
        match key {
            "state" => Self::State,
            "amount" => Self::Amount,
            "location" => Self::Location,
            other => Self::Flag(other.strip_prefix("state.").unwrap_or(other).to_string()),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Location => f.write_str("location"),
            Self::State => f.write_str("state"),
            Self::Flag(k) => write!(f, "state.{k}"),
            Self::Amount => f.write_str("amount"),
        }
    }
}

impl FromStr for Slot {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s == "state." {
            return Err(format!("invalid slot `{s}`"));
        }
        Ok(Self::from_key(s))
    }
}

impl Serialize for Slot {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Slot {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub instance_id: String,
    pub label: String,
    pub kind: NodeKind,
    pub location: Option<String>,
    pub state: Option<String>,
    pub amount: Option<Amount>,
    /// `state.<key>` sub-slots.
    pub flags: BTreeMap<String, String>,
}

impl Node {
    pub fn area(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            label: id.clone(),
            instance_id: id,
            kind: NodeKind::Area,
            location: None,
            state: None,
            amount: None,
            flags: BTreeMap::new(),
        }
    }

    pub fn object(id: impl Into<String>, label: impl Into<String>, location: impl Into<String>) -> Self {
        Self {
            instance_id: id.into(),
            label: label.into(),
            kind: NodeKind::Object,
            location: Some(location.into()),
            state: None,
            amount: None,
            flags: BTreeMap::new(),
        }
    }

    pub fn with_state(mut self, state: impl Into<String>) -> Self {
        self.state = Some(state.into());
        self
    }

    pub fn with_flag(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.flags.insert(key.into(), value.into());
        self
    }

    pub fn with_amount(mut self, amount: Amount) -> Self {
        self.amount = Some(amount);
        self
    }

    pub fn with_kind(mut self, kind: NodeKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn slot(&self, slot: &Slot) -> Option<String> {
        match slot {
            Slot::Location => self.location.clone(),
            Slot::State => self.state.clone(),
            Slot::Flag(k) => self.flags.get(k).cloned(),
            Slot::Amount => self.amount.map(|a| a.as_str().to_string()),
        }
    }

    /// All populated slots in canonical order.
    pub fn slots(&self) -> Vec<(Slot, String)> {
        let mut out = Vec::new();
        if let Some(l) = &self.location {
            out.push((Slot::Location, l.clone()));
        }
        if let Some(s) = &self.state {
            out.push((Slot::State, s.clone()));
        }
        for (k, v) in &self.flags {
            out.push((Slot::Flag(k.clone()), v.clone()));
        }
        if let Some(a) = self.amount {
            out.push((Slot::Amount, a.as_str().to_string()));
        }
        out
    }

    pub(crate) fn set_slot(&mut self, slot: &Slot, value: Option<String>) -> Result<(), String> {
        match slot {
            Slot::Location => self.location = value,
            Slot::State => self.state = value,
            Slot::Flag(k) => match value {
                Some(v) => {
                    self.flags.insert(k.clone(), v);
                }
                None => {
                    self.flags.remove(k);
                }
            },
            Slot::Amount => {
                self.amount = value.map(|v| v.parse()).transpose()?;
            }
        }
        Ok(())
    }
}

// Canonical node document: fixed fields, then `state.<key>` sub-slots flattened.
#[derive(Serialize, Deserialize)]
struct NodeDoc {
    instance_id: String,
    label: String,
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amount: Option<Amount>,
    #[serde(flatten)]
    sub_slots: BTreeMap<String, String>,
}

impl Serialize for Node {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        NodeDoc {
            instance_id: self.instance_id.clone(),
            label: self.label.clone(),
            kind: self.kind,
            location: self.location.clone(),
            state: self.state.clone(),
            amount: self.amount,
            sub_slots: self
                .flags
                .iter()
                .map(|(k, v)| (format!("state.{k}"), v.clone()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = NodeDoc::deserialize(d)?;
        let mut flags = BTreeMap::new();
        for (k, v) in doc.sub_slots {
            match k.strip_prefix("state.") {
                Some(key) if !key.is_empty() => {
                    flags.insert(key.to_string(), v);
                }
                _ => return Err(serde::de::Error::custom(format!("unknown node field `{k}`"))),
            }
        }
        Ok(Node {
            instance_id: doc.instance_id,
            label: doc.label,
            kind: doc.kind,
            location: doc.location,
            state: doc.state,
            amount: doc.amount,
            flags,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Left => "left",
            Self::Right => "right",
        }
    }
}

/// The agent's body: where it stands and what it holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPhysState {
    pub current_area: String,
    pub left_hand: Option<String>,
    pub right_hand: Option<String>,
}

impl AgentPhysState {
    pub fn at(area: impl Into<String>) -> Self {
        Self {
            current_area: area.into(),
            left_hand: None,
            right_hand: None,
        }
    }

    pub fn hand(&self, hand: Hand) -> Option<&str> {
        match hand {
            Hand::Left => self.left_hand.as_deref(),
            Hand::Right => self.right_hand.as_deref(),
        }
    }

    pub fn holds(&self, id: &str) -> Option<Hand> {
        if self.right_hand.as_deref() == Some(id) {
            Some(Hand::Right)
        } else if self.left_hand.as_deref() == Some(id) {
            Some(Hand::Left)
        } else {
            None
        }
    }

    pub fn held(&self) -> impl Iterator<Item = &str> {
        self.right_hand.as_deref().into_iter().chain(self.left_hand.as_deref())
    }

    /// Right hand is filled first.
    pub fn free_hand(&self) -> Option<Hand> {
        if self.right_hand.is_none() {
            Some(Hand::Right)
        } else if self.left_hand.is_none() {
            Some(Hand::Left)
        } else {
            None
        }
    }

    pub(crate) fn set_hand(&mut self, hand: Hand, content: Option<String>) {
        match hand {
            Hand::Left => self.left_hand = content,
            Hand::Right => self.right_hand = content,
        }
    }
}

/// Everything needed to instantiate a world graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioInit {
    pub areas: Vec<String>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub agent_start: String,
    /// Opaque anchor-image reference per area.
    #[serde(default)]
    pub image_refs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate instance id `{0}`")]
    DuplicateInstanceId(String),
    #[error("`{node}` references unknown area `{area}`")]
    UnknownAreaReference { node: String, area: String },
    #[error("containment cycle through {0:?}")]
    ContainmentCycle(Vec<String>),
    #[error("edge `{edge}` has unknown endpoint `{endpoint}`")]
    UnknownEdgeEndpoint { edge: String, endpoint: String },
    #[error("node `{node}`: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("agent: {0}")]
    InvalidAgent(String),
    #[error("malformed graph document: {0}")]
    Format(String),
}

/// Hex sha-256 digest of a canonicalized snapshot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub String);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Digest {
    /// Digest of any serializable value's compact JSON form.
    pub fn of_json<T: Serialize>(value: &T) -> Self {
        let bytes = serde_json::to_vec(value).expect("value serializes");
        Self::of_bytes(&bytes)
    }

    pub fn of_bytes(bytes: &[u8]) -> Self {
        let out = Sha256::digest(bytes);
        Digest(out.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn short(&self) -> &str {
        &self.0[..self.0.len().min(16)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldGraph {
    areas: Vec<String>,
    nodes: BTreeMap<String, Node>,
    edges: BTreeSet<Edge>,
    agent: AgentPhysState,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    format: String,
    areas: Vec<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    agent: AgentPhysState,
    step: u64,
}

impl WorldGraph {
    /// Builds the episode-start graph. Area nodes are synthesized from `areas`.
    pub fn instantiate(init: &ScenarioInit) -> Result<Self, GraphError> {
        let mut nodes = BTreeMap::new();
        for area in &init.areas {
            if nodes.insert(area.clone(), Node::area(area.clone())).is_some() {
                return Err(GraphError::DuplicateInstanceId(area.clone()));
            }
        }
        for node in &init.nodes {
            if node.kind == NodeKind::Area {
                return Err(GraphError::InvalidNode {
                    node: node.instance_id.clone(),
                    reason: "areas are declared in the area list, not as nodes".into(),
                });
            }
            if nodes.insert(node.instance_id.clone(), node.clone()).is_some() {
                return Err(GraphError::DuplicateInstanceId(node.instance_id.clone()));
            }
        }
        let g = Self {
            areas: init.areas.clone(),
            nodes,
            edges: init.edges.iter().cloned().collect(),
            agent: AgentPhysState::at(init.agent_start.clone()),
            step: 0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Assembles and validates a graph from its parts.
    pub fn from_components(
        areas: Vec<String>,
        nodes: impl IntoIterator<Item = Node>,
        edges: impl IntoIterator<Item = Edge>,
        agent: AgentPhysState,
        step: u64,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            let id = n.instance_id.clone();
            if map.insert(id.clone(), n).is_some() {
                return Err(GraphError::DuplicateInstanceId(id));
            }
        }
        let g = Self {
            areas,
            nodes: map,
            edges: edges.into_iter().collect(),
            agent,
            step,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn areas(&self) -> &[String] {
        &self.areas
    }

    pub fn is_area(&self, id: &str) -> bool {
        self.nodes.get(id).is_some_and(|n| n.kind == NodeKind::Area)
    }

    pub fn lookup_instance(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    /// Non-area nodes.
    pub fn objects(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind != NodeKind::Area)
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn agent(&self) -> &AgentPhysState {
        &self.agent
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn slot_value(&self, id: &str, slot: &Slot) -> Option<String> {
        self.nodes.get(id).and_then(|n| n.slot(slot))
    }

    pub fn has_edge(&self, src: &str, relation: Relation, dst: &str) -> bool {
        self.edges.contains(&Edge::new(src, relation, dst))
    }

    /// Sources of `relation` edges pointing at `dst`, sorted.
    pub fn parents(&self, dst: &str, relation: Relation) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|e| e.relation == relation && e.dst == dst)
            .map(|e| e.src.as_str())
            .collect()
    }

    /// Transitive contents (via `contains` and `supports`) of `id`, sorted, excluding `id`.
    pub fn dependents(&self, id: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![id.to_string()];
        while let Some(cur) = stack.pop() {
            for e in &self.edges {
                if e.src == cur
                    && matches!(e.relation, Relation::Contains | Relation::Supports)
                    && e.dst != id
                    && seen.insert(e.dst.clone())
                {
                    stack.push(e.dst.clone());
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Every label present in the graph.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.nodes.values().map(|n| n.label.as_str()).collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        let area_set: BTreeSet<&str> = self.areas.iter().map(String::as_str).collect();
        if area_set.len() != self.areas.len() {
            let mut seen = BTreeSet::new();
            let dup = self
                .areas
                .iter()
                .find(|a| !seen.insert(a.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(GraphError::DuplicateInstanceId(dup));
        }
        for area in &self.areas {
            match self.nodes.get(area) {
                Some(n) if n.kind == NodeKind::Area => {}
                _ => {
                    return Err(GraphError::InvalidNode {
                        node: area.clone(),
                        reason: "area without area node".into(),
                    })
                }
            }
        }
        for (id, node) in &self.nodes {
            if id != &node.instance_id {
                return Err(GraphError::InvalidNode {
                    node: id.clone(),
                    reason: "key does not match instance_id".into(),
                });
            }
            match node.kind {
                NodeKind::Area => {
                    if !area_set.contains(id.as_str()) {
                        return Err(GraphError::InvalidNode {
                            node: id.clone(),
                            reason: "area node missing from area list".into(),
                        });
                    }
                    if node.location.is_some() || node.state.is_some() {
                        return Err(GraphError::InvalidNode {
                            node: id.clone(),
                            reason: "area nodes carry no location or state".into(),
                        });
                    }
                }
                kind => {
                    match &node.location {
                        Some(loc) if area_set.contains(loc.as_str()) => {}
                        Some(loc) => {
                            return Err(GraphError::UnknownAreaReference {
                                node: id.clone(),
                                area: loc.clone(),
                            })
                        }
                        None => {
                            return Err(GraphError::InvalidNode {
                                node: id.clone(),
                                reason: "object without location".into(),
                            })
                        }
                    }
                    if kind == NodeKind::Substance && node.amount.is_none() {
                        return Err(GraphError::InvalidNode {
                            node: id.clone(),
                            reason: "substance without amount".into(),
                        });
                    }
                }
            }
        }
        for e in &self.edges {
            for endpoint in [&e.src, &e.dst] {
                if !self.nodes.contains_key(endpoint) {
                    return Err(GraphError::UnknownEdgeEndpoint {
                        edge: e.to_string(),
                        endpoint: endpoint.clone(),
                    });
                }
            }
            if e.src == e.dst {
                return Err(GraphError::ContainmentCycle(vec![e.src.clone()]));
            }
        }
        self.check_acyclic()?;
        self.validate_agent()
    }

    fn validate_agent(&self) -> Result<(), GraphError> {
        let a = &self.agent;
        if !self.is_area(&a.current_area) {
            return Err(GraphError::UnknownAreaReference {
                node: "agent".into(),
                area: a.current_area.clone(),
            });
        }
        if a.left_hand.is_some() && a.left_hand == a.right_hand {
            return Err(GraphError::InvalidAgent("same instance in both hands".into()));
        }
        for held in a.held() {
            let Some(node) = self.nodes.get(held) else {
                return Err(GraphError::InvalidAgent(format!("holds unknown instance `{held}`")));
            };
            if node.kind == NodeKind::Area {
                return Err(GraphError::InvalidAgent(format!("holds area `{held}`")));
            }
            if node.location.as_deref() != Some(a.current_area.as_str()) {
                return Err(GraphError::InvalidAgent(format!("held `{held}` is not with the agent")));
            }
            if self
                .edges
                .iter()
                .any(|e| e.dst == held && matches!(e.relation, Relation::Contains | Relation::Supports))
            {
                return Err(GraphError::InvalidAgent(format!("held `{held}` is inside a container")));
            }
        }
        Ok(())
    }

    fn check_acyclic(&self) -> Result<(), GraphError> {
        // Kahn's algorithm over `contains` edges.
        let contains: Vec<&Edge> = self.edges.iter().filter(|e| e.relation == Relation::Contains).collect();
        let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &contains {
            indegree.entry(e.src.as_str()).or_default();
            *indegree.entry(e.dst.as_str()).or_default() += 1;
        }
        let mut ready: Vec<&str> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut removed = 0;
        while let Some(n) = ready.pop() {
            removed += 1;
            for e in contains.iter().filter(|e| e.src == n) {
                let d = indegree.get_mut(e.dst.as_str()).expect("endpoint indexed");
                *d -= 1;
                if *d == 0 {
                    ready.push(e.dst.as_str());
                }
            }
        }
        if removed == indegree.len() {
            Ok(())
        } else {
            let cycle = indegree
                .into_iter()
                .filter(|(_, d)| *d > 0)
                .map(|(n, _)| n.to_string())
                .collect();
            Err(GraphError::ContainmentCycle(cycle))
        }
    }

    /// Order-independent digest over areas, nodes, edges and the agent body.
    /// The step counter is excluded so equal states hash equally.
    pub fn snapshot_hash(&self) -> Digest {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(b"areas");
        for a in &self.areas {
            field(a.as_bytes());
        }
        field(b"nodes");
        for node in self.nodes.values() {
            field(node.instance_id.as_bytes());
            field(node.label.as_bytes());
            field(format!("{:?}", node.kind).as_bytes());
            for (slot, value) in node.slots() {
                field(slot.to_string().as_bytes());
                field(value.as_bytes());
            }
            field(b";");
        }
        field(b"edges");
        for e in &self.edges {
            field(e.src.as_bytes());
            field(e.relation.as_str().as_bytes());
            field(e.dst.as_bytes());
        }
        field(b"agent");
        field(self.agent.current_area.as_bytes());
        field(self.agent.left_hand.as_deref().unwrap_or("").as_bytes());
        field(self.agent.right_hand.as_deref().unwrap_or("").as_bytes());
        let out = h.finalize();
        Digest(out.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Canonical snapshot document: sorted nodes and edges, stable key order.
    pub fn to_canonical_json(&self) -> String {
        let doc = GraphDoc {
            format: GRAPH_FORMAT.to_string(),
            areas: self.areas.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.iter().cloned().collect(),
            agent: self.agent.clone(),
            step: self.step,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_canonical_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        if doc.format != GRAPH_FORMAT {
            return Err(GraphError::Format(format!("unsupported format `{}`", doc.format)));
        }
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let id = n.instance_id.clone();
            if nodes.insert(id.clone(), n).is_some() {
                return Err(GraphError::DuplicateInstanceId(id));
            }
        }
        let g = Self {
            areas: doc.areas,
            nodes,
            edges: doc.edges.into_iter().collect(),
            agent: doc.agent,
            step: doc.step,
        };
        g.validate()?;
        Ok(g)
    }

    // --- crate-private mutation, used by the rule engine and diff application ---

    pub(crate) fn nodes_mut(&mut self) -> &mut BTreeMap<String, Node> {
        &mut self.nodes
    }

    pub(crate) fn edges_mut(&mut self) -> &mut BTreeSet<Edge> {
        &mut self.edges
    }

    pub(crate) fn agent_mut(&mut self) -> &mut AgentPhysState {
        &mut self.agent
    }

    pub(crate) fn bump_step(&mut self) {
        self.step += 1;
    }
}
