//! Deterministic stand-in for anchor-image visual queries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{Relation, Slot, WorldGraph};
use crate::observation::{unoccluded_subgraph, ObservationError};

/// Confidence stamped on every node learned from a visual report.
pub const VISUAL_CONFIDENCE: f64 = 0.85;
/// Queries are only allowed for targets believed below this confidence.
pub const VISUAL_TRIGGER_CONFIDENCE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub instance_id: String,
    pub label: String,
    /// Container or supporter the object sits in/on, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inside: Option<String>,
    pub states: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualReport {
    pub area: String,
    pub entries: Vec<ReportEntry>,
}

impl VisualReport {
    pub fn mentions(&self, id_or_label: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.instance_id == id_or_label || e.label == id_or_label)
    }
}

/// Truthful report of everything in `area`, closed storage included.
pub fn visual_oracle_query(hidden: &WorldGraph, area: &str) -> Result<VisualReport, ObservationError> {
    let view = unoccluded_subgraph(hidden, area)?;
    let entries = view
        .objects()
        .map(|n| ReportEntry {
            instance_id: n.instance_id.clone(),
            label: n.label.clone(),
            inside: view
                .edges
                .iter()
                .find(|e| e.dst == n.instance_id && matches!(e.relation, Relation::Contains | Relation::Supports))
                .map(|e| e.src.clone()),
            states: n
                .slots()
                .into_iter()
                .filter(|(s, _)| *s != Slot::Location)
                .map(|(s, v)| (s.to_string(), v))
                .collect(),
        })
        .collect();
    Ok(VisualReport {
        area: area.to_string(),
        entries,
    })
}
