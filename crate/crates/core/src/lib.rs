//! Hidden-world symbolic simulator for household-task planning under partial
//! observation.

pub mod belief;
pub mod eval;
pub mod graph;
pub mod observation;
pub mod protocol;
pub mod rules;
pub mod runtime;
pub mod scenario;
pub mod syntax;
pub mod task;

pub use graph::{
    AgentPhysState, Amount, Digest, Edge, GraphError, Hand, Node, NodeKind, Relation, ScenarioInit, Slot, WorldGraph,
};
pub use rules::{Feedback, PrimitiveAction, RuleBase, WorldRule};
