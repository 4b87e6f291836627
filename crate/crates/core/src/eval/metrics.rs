//! Per-task metrics: action F1, WSR, TSR, TCR and validity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::slots::slot_value;
use crate::graph::{Digest, WorldGraph};
use crate::rules::{execute_in_place, PrimitiveAction};
use crate::runtime::TaskRunLog;
use crate::scenario::Episode;
use crate::task::KeyAction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("log was produced from init {found}, episode init is {expected}")]
    InitMismatch { expected: Digest, found: Digest },
    #[error("log refers to unknown task `{0}`")]
    UnknownTask(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn counts<'a>(xs: impl IntoIterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut m = BTreeMap::new();
    for x in xs {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

/// Multiset precision/recall/F1 over action types. Both empty → 1; one empty → 0.
pub fn action_f1<'a>(gt: impl IntoIterator<Item = &'a str>, pred: impl IntoIterator<Item = &'a str>) -> Prf {
    let g = counts(gt);
    let p = counts(pred);
    let (ng, np): (usize, usize) = (g.values().sum(), p.values().sum());
    if ng == 0 && np == 0 {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    if ng == 0 || np == 0 {
        return Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let hit: usize = g.iter().map(|(k, c)| (*c).min(p.get(k).copied().unwrap_or(0))).sum();
    let precision = hit as f64 / np as f64;
    let recall = hit as f64 / ng as f64;
    let f1 = if hit == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// Predicted primitives replayed from a start state; invalid ones are skipped.
#[derive(Debug, Clone)]
pub struct Replay {
    pub end: WorldGraph,
    pub attempted: usize,
    pub valid: usize,
    /// Key of every accepted primitive, resolved in its pre-state.
    pub valid_keys: Vec<KeyAction>,
}

pub fn replay(ep: &Episode, start: &WorldGraph, actions: &[PrimitiveAction]) -> Replay {
    let mut g = start.clone();
    let mut valid_keys = Vec::new();
    for a in actions {
        let a = ep.normalize(a);
        let key = KeyAction::of(&a, &g);
        if execute_in_place(&mut g, &ep.rules, &a).feedback.is_success() {
            valid_keys.push(key);
        }
    }
    Replay {
        end: g,
        attempted: actions.len(),
        valid: valid_keys.len(),
        valid_keys,
    }
}

/// Fraction of the task's changed slots whose replayed value equals the GT
/// end value. Tasks with no changed slot score 1.
pub fn wsr_of(ep: &Episode, k: usize, end: &WorldGraph) -> f64 {
    let slots = &ep.changed_slots[k];
    if slots.is_empty() {
        return 1.0;
    }
    let gt = &ep.gt_post[k];
    let hit = slots.iter().filter(|s| slot_value(end, s) == slot_value(gt, s)).count();
    hit as f64 / slots.len() as f64
}

/// Multiset fraction of key actions found among the accepted primitives.
pub fn tcr_of(key_actions: &[KeyAction], valid: &[KeyAction]) -> f64 {
    if key_actions.is_empty() {
        return 1.0;
    }
    let mut pool: Vec<&KeyAction> = valid.iter().collect();
    let mut hit = 0;
    for k in key_actions {
        if let Some(i) = pool.iter().position(|v| *v == k) {
            pool.swap_remove(i);
            hit += 1;
        }
    }
    hit as f64 / key_actions.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub position: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tsr: bool,
    pub tcr: f64,
    pub wsr: f64,
    pub validity: f64,
    pub replans: usize,
    pub repairs: usize,
    pub visual_queries: usize,
    pub attempted: usize,
}

/// Scores one task from the actions alone (used for GT and constructed runs).
pub fn score_actions(ep: &Episode, k: usize, actions: &[PrimitiveAction]) -> TaskScore {
    let task = &ep.tasks[k];
    let r = replay(ep, &ep.gt_pre[k], actions);
    let gt_types = ep.gt_chains[k].iter().map(|a| a.action_type.as_str());
    let normalized: Vec<PrimitiveAction> = actions.iter().map(|a| ep.normalize(a)).collect();
    let prf = action_f1(gt_types, normalized.iter().map(|a| a.action_type.as_str()));
    TaskScore {
        task_id: task.task_id.clone(),
        position: k,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        tsr: task.goal.holds(&r.end),
        tcr: tcr_of(&task.key_actions, &r.valid_keys),
        wsr: wsr_of(ep, k, &r.end),
        validity: if r.attempted == 0 {
            1.0
        } else {
            r.valid as f64 / r.attempted as f64
        },
        replans: 0,
        repairs: 0,
        visual_queries: 0,
        attempted: r.attempted,
    }
}

/// Scores a run log by replaying its primitives from the task's GT pre-state.
pub fn score_log(ep: &Episode, log: &TaskRunLog) -> Result<TaskScore, EvalError> {
    if log.init_digest != ep.init_digest() {
        return Err(EvalError::InitMismatch {
            expected: ep.init_digest(),
            found: log.init_digest.clone(),
        });
    }
    let k = ep
        .task_index(&log.task_id)
        .ok_or_else(|| EvalError::UnknownTask(log.task_id.clone()))?;
    let actions: Vec<PrimitiveAction> = log.actions().cloned().collect();
    let within_budget = actions.len() <= log.step_budget;
    let mut s = score_actions(ep, k, &actions);
    s.tsr &= within_budget;
    s.position = log.position;
    s.replans = log.counters.replans;
    s.repairs = log.counters.repairs;
    s.visual_queries = log.counters.visual_queries;
    Ok(s)
}
