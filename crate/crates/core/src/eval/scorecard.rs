//! Aggregation into a ScoreCard, long-horizon position table, TSV rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{score_actions, score_log, EvalError, TaskScore};
use crate::runtime::TaskRunLog;
use crate::scenario::Episode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub position: usize,
    pub n: usize,
    pub f1: f64,
    pub tsr: f64,
    pub visual_queries: f64,
}

/// Macro means over tasks, plus episode-level success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tsr: f64,
    pub tcr: f64,
    pub wsr: f64,
    pub validity: f64,
    pub replan_mean: f64,
    pub visual_queries: usize,
    /// Fraction of episodes whose every task succeeded.
    pub episode_tsr: f64,
    pub tasks: Vec<TaskScore>,
    pub positions: Vec<PositionRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-position means; positions without samples are omitted.
pub fn aggregate_long_horizon(tasks: &[TaskScore]) -> Vec<PositionRow> {
    let mut by: BTreeMap<usize, Vec<&TaskScore>> = BTreeMap::new();
    for t in tasks {
        by.entry(t.position).or_default().push(t);
    }
    by.into_iter()
        .map(|(position, ts)| PositionRow {
            position,
            n: ts.len(),
            f1: mean(ts.iter().map(|t| t.f1)),
            tsr: mean(ts.iter().map(|t| f64::from(u8::from(t.tsr)))),
            visual_queries: mean(ts.iter().map(|t| t.visual_queries as f64)),
        })
        .collect()
}

impl ScoreCard {
    /// `episodes` groups task scores by episode for the episode-level rate.
    pub fn from_scores(episodes: &[Vec<TaskScore>]) -> Self {
        let tasks: Vec<TaskScore> = episodes.iter().flatten().cloned().collect();
        let m = |f: fn(&TaskScore) -> f64| mean(tasks.iter().map(f));
        Self {
            f1: m(|t| t.f1),
            precision: m(|t| t.precision),
            recall: m(|t| t.recall),
            tsr: m(|t| f64::from(u8::from(t.tsr))),
            tcr: m(|t| t.tcr),
            wsr: m(|t| t.wsr),
            validity: m(|t| t.validity),
            replan_mean: m(|t| t.replans as f64),
            visual_queries: tasks.iter().map(|t| t.visual_queries).sum(),
            episode_tsr: mean(
                episodes
                    .iter()
                    .filter(|e| !e.is_empty())
                    .map(|e| f64::from(u8::from(e.iter().all(|t| t.tsr)))),
            ),
            positions: aggregate_long_horizon(&tasks),
            tasks,
        }
    }

    /// Flat table: one row per task, then `ALL`.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("task\tposition\tf1\tprecision\trecall\ttsr\ttcr\twsr\tvalidity\treplans\tvisual_queries\n");
        for t in &self.tasks {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}",
                t.task_id,
                t.position,
                t.f1,
                t.precision,
                t.recall,
                u8::from(t.tsr),
                t.tcr,
                t.wsr,
                t.validity,
                t.replans,
                t.visual_queries
            );
        }
        let _ = writeln!(
            out,
            "ALL\t-\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
            self.f1,
            self.precision,
            self.recall,
            self.tsr,
            self.tcr,
            self.wsr,
            self.validity,
            self.replan_mean,
            self.visual_queries
        );
        out
    }
}

/// Scores one episode's logs.
pub fn score_episode(ep: &Episode, logs: &[TaskRunLog]) -> Result<ScoreCard, EvalError> {
    let scores = logs.iter().map(|l| score_log(ep, l)).collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreCard::from_scores(&[scores]))
}

/// Scores the compiled GT chains themselves.
pub fn score_ground_truth(ep: &Episode) -> ScoreCard {
    let scores = (0..ep.tasks.len())
        .map(|k| score_actions(ep, k, &ep.gt_chains[k]))
        .collect();
    ScoreCard::from_scores(&[scores])
}
