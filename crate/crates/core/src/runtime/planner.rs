//! What crosses the planner boundary. Nothing here references the hidden world.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefGraph;
use crate::graph::AgentPhysState;
use crate::rules::{Feedback, PrimitiveAction};
use crate::task::{GoalPredicate, SkillCall};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no template matches the goal")]
    NoTemplate,
    #[error("malformed planner response: {0}")]
    Malformed(String),
    #[error("planner disconnected: {0}")]
    Disconnected(String),
    #[error("planner timed out")]
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub task_id: String,
    pub instruction: String,
    pub goal: GoalPredicate,
    /// Skill signatures the plan may use.
    pub skills: Vec<String>,
    pub belief: BeliefGraph,
    pub agent: AgentPhysState,
    /// Skills already completed in this task; the plan should continue after them.
    pub completed: Vec<SkillCall>,
    /// Why the previous plan stopped, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<String>,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairRequest {
    pub task_id: String,
    pub failed_action: PrimitiveAction,
    pub violated: String,
    /// 1-based.
    pub attempt: usize,
    pub belief: BeliefGraph,
    pub agent: AgentPhysState,
    pub observation: String,
}

/// Fire-and-forget notifications, in the order the runner produces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Notice {
    TaskContext {
        task_id: String,
        position: usize,
        instruction: String,
        goal: GoalPredicate,
        skills: Vec<String>,
        current_area: String,
        left_hand: Option<String>,
        right_hand: Option<String>,
    },
    Feedback {
        step: u64,
        action: PrimitiveAction,
        feedback: Feedback,
    },
    Observation {
        step: u64,
        area: String,
        image_ref: String,
        text: String,
    },
    TaskEnd {
        task_id: String,
        goal_reached: bool,
    },
}

/// Maps the task and the belief to skills, and proposes single-action repairs.
pub trait Planner {
    fn plan(&mut self, req: &PlanRequest) -> Result<Vec<SkillCall>, PlanError>;

    /// One corrected primitive, or `None` to give up and replan.
    fn repair(&mut self, req: &RepairRequest) -> Result<Option<PrimitiveAction>, PlanError>;

    fn notify(&mut self, _notice: &Notice) {}
}

/// Replays fixed per-task skill lists; never repairs.
#[derive(Debug, Clone, Default)]
pub struct ScriptedPlanner {
    scripts: Vec<(String, Vec<SkillCall>)>,
}

impl ScriptedPlanner {
    pub fn new(scripts: impl IntoIterator<Item = (String, Vec<SkillCall>)>) -> Self {
        Self {
            scripts: scripts.into_iter().collect(),
        }
    }

    /// Scripts each task's authored GT skills.
    pub fn ground_truth(ep: &crate::scenario::Episode) -> Self {
        Self::new(ep.tasks.iter().map(|t| (t.task_id.clone(), t.gt_skills.clone())))
    }
}

impl Planner for ScriptedPlanner {
    fn plan(&mut self, req: &PlanRequest) -> Result<Vec<SkillCall>, PlanError> {
        let script = self
            .scripts
            .iter()
            .find(|(id, _)| *id == req.task_id)
            .map(|(_, s)| s.as_slice())
            .unwrap_or_default();
        Ok(script.iter().skip(req.completed.len()).cloned().collect())
    }

    fn repair(&mut self, _req: &RepairRequest) -> Result<Option<PrimitiveAction>, PlanError> {
        Ok(None)
    }
}
