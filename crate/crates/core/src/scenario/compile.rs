use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_scenario, ScenarioFile, ValidationReport};
use crate::eval::slots::{changed_slots, SlotRef};
use crate::graph::{AgentPhysState, Digest, GraphError, WorldGraph};
use crate::observation::{apply_delta, diff_views, DeltaSet, GraphView};
use crate::rules::{execute_in_place, Feedback, PrimitiveAction, RuleBase};
use crate::task::{KeyAction, SkillBook, SkillCall, Task, TaskError};

/// Outcome of one authored GT step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExecMeta {
    Success,
    Invalid { violated: String },
    Skipped,
}

/// One GT skill step: pre-state, primitives, post-state, delta and outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub task_id: String,
    pub step: usize,
    pub skill: SkillCall,
    pub pre_state_ref: Digest,
    pub primitives: Vec<PrimitiveAction>,
    pub post_state_ref: Digest,
    /// Whole-graph delta from pre to post.
    pub delta: DeltaSet,
    /// Agent body after the step (not part of the node/edge delta).
    pub agent: AgentPhysState,
    pub exec_meta: ExecMeta,
}

impl TransitionRecord {
    /// Applies this record's delta and agent state to `pre`.
    pub fn apply(&self, pre: &WorldGraph) -> Result<WorldGraph, String> {
        let view = apply_delta(&GraphView::whole(pre), &self.delta)?;
        WorldGraph::from_components(
            pre.areas().to_vec(),
            view.nodes.into_values(),
            view.edges,
            self.agent.clone(),
            pre.step() + self.primitives.len() as u64,
        )
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay of task `{task_id}` failed at step {step} (`{action}`): {violated}")]
pub struct ReplayFailure {
    pub task_id: String,
    pub step: usize,
    /// The failing primitive, rendered.
    pub action: String,
    pub violated: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("validation failed:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Replay(#[from] ReplayFailure),
    #[error("task `{0}`: goal does not hold at the end of its GT chain")]
    GoalUnmet(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Task(#[from] TaskError),
}

/// A compiled scenario: the world, its rules and the GT-derived references.
#[derive(Debug, Clone)]
pub struct Episode {
    pub episode_id: String,
    pub scenario: ScenarioFile,
    pub init: WorldGraph,
    pub rules: RuleBase,
    pub skills: SkillBook,
    pub tasks: Vec<Task>,
    /// Normalized GT primitive chain per task.
    pub gt_chains: Vec<Vec<PrimitiveAction>>,
    /// GT-replay snapshot at each task's start and end.
    pub gt_pre: Vec<WorldGraph>,
    pub gt_post: Vec<WorldGraph>,
    /// Changed slots per task.
    pub changed_slots: Vec<BTreeSet<SlotRef>>,
    pub symbols: BTreeSet<String>,
}

impl Episode {
    pub fn init_digest(&self) -> Digest {
        self.init.snapshot_hash()
    }

    pub fn image_ref(&self, area: &str) -> String {
        self.scenario
            .areas
            .iter()
            .find(|a| a.id == area)
            .map_or_else(|| format!("anchors/{area}.png"), |a| a.image.clone())
    }

    pub fn task_index(&self, task_id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.task_id == task_id)
    }

    /// Normalizes a primitive's verb through the scenario's verb map.
    pub fn normalize(&self, a: &PrimitiveAction) -> PrimitiveAction {
        PrimitiveAction {
            action_type: self.scenario.normalize_verb(&a.action_type).to_string(),
            ..a.clone()
        }
    }

    /// Skill vocabulary announced to planners.
    pub fn skill_vocabulary(&self) -> Vec<String> {
        self.skills.iter().map(|s| s.signature.to_string()).collect()
    }
}

fn run_skill(
    g: &mut WorldGraph,
    rules: &RuleBase,
    prims: &[PrimitiveAction],
    task_id: &str,
    step: usize,
) -> Result<(), ReplayFailure> {
    for a in prims {
        let exec = execute_in_place(g, rules, a);
        let violated = match exec.feedback {
            Feedback::Success => continue,
            Feedback::Fail { violated } => violated.to_string(),
            Feedback::NoRule => "no rule matches".to_string(),
        };
        return Err(ReplayFailure {
            task_id: task_id.to_string(),
            step,
            action: a.to_string(),
            violated,
        });
    }
    Ok(())
}

/// Validates, instantiates, replays every GT chain in order over one world,
/// and records one transition per GT skill step.
pub fn compile_episode(s: &ScenarioFile) -> Result<(Episode, Vec<TransitionRecord>), CompileError> {
    let report = validate_scenario(s);
    if !report.passed() {
        return Err(CompileError::Invalid(report));
    }
    let init = WorldGraph::instantiate(&s.init())?;
    let rules = RuleBase::new(s.rule_list());
    let skills = SkillBook::new(s.skills.iter().map(|d| d.skill.clone()));
    let mut g = init.clone();
    let mut records = Vec::new();
    let mut tasks = Vec::new();
    let (mut gt_chains, mut gt_pre, mut gt_post, mut changed) = (vec![], vec![], vec![], vec![]);

    for decl in &s.tasks {
        let pre_task = g.clone();
        let mut chain = Vec::new();
        let mut centers = Vec::new();
        for (i, call) in decl.gt.iter().enumerate() {
            let ground = skills.ground(call)?;
            let prims: Vec<PrimitiveAction> = crate::task::expand_skill(&ground)
                .iter()
                .map(|p| PrimitiveAction {
                    action_type: s.normalize_verb(&p.action_type).to_string(),
                    ..p.clone()
                })
                .collect();
            let before = g.clone();
            run_skill(&mut g, &rules, &prims, &decl.task_id, i)?;
            centers.push(KeyAction::of(
                &PrimitiveAction {
                    action_type: s.normalize_verb(&ground.center.action_type).to_string(),
                    ..ground.center.clone()
                },
                &before,
            ));
            records.push(TransitionRecord {
                task_id: decl.task_id.clone(),
                step: i,
                skill: call.clone(),
                pre_state_ref: before.snapshot_hash(),
                primitives: prims.clone(),
                post_state_ref: g.snapshot_hash(),
                delta: diff_views(&GraphView::whole(&before), &GraphView::whole(&g)),
                agent: g.agent().clone(),
                exec_meta: ExecMeta::Success,
            });
            chain.extend(prims);
        }
        if !decl.goal.holds(&g) {
            return Err(CompileError::GoalUnmet(decl.task_id.clone()));
        }
        tasks.push(Task {
            task_id: decl.task_id.clone(),
            instruction: decl.instruction.clone(),
            goal: decl.goal.clone(),
            key_actions: decl.key_actions.clone().unwrap_or(centers),
            gt_skills: decl.gt.clone(),
        });
        changed.push(changed_slots(&pre_task, &g));
        gt_chains.push(chain);
        gt_pre.push(pre_task);
        gt_post.push(g.clone());
    }

    let episode = Episode {
        episode_id: s.id.clone(),
        scenario: s.clone(),
        init,
        rules,
        skills,
        tasks,
        gt_chains,
        gt_pre,
        gt_post,
        changed_slots: changed,
        symbols: s.symbols(),
    };
    Ok((episode, records))
}
