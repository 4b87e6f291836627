use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{parse_scenario, Dataset, ExecMeta};
use crate::graph::{NodeKind, Slot};
use crate::rules::{execute_in_place, Effect, Feedback, RuleBase};

/// Mechanical quality audit of a compiled dataset. All values are rates in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Authored GT steps with a successful record.
    pub coverage: f64,
    /// Emitted symbols with no scenario declaration behind them.
    pub hallucination: f64,
    /// Goal clauses not holding at their task's recorded end state.
    pub missing_key_state: f64,
    /// Records whose primitives, re-executed from the pre snapshot, reach the post digest.
    pub replay_success: f64,
    /// Records that break the authored order or the state chain.
    pub temporal_error: f64,
    pub findings: Vec<String>,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "coverage           {:.2}", self.coverage)?;
        writeln!(f, "hallucination      {:.2}", self.hallucination)?;
        writeln!(f, "missing_key_state  {:.2}", self.missing_key_state)?;
        writeln!(f, "replay_success     {:.2}", self.replay_success)?;
        writeln!(f, "temporal_error     {:.2}", self.temporal_error)?;
        for x in &self.findings {
            writeln!(f, "  {x}")?;
        }
        Ok(())
    }
}

fn rate(bad: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Does `id` instantiate an add-template such as `brewed_coffee_#`?
fn matches_template(id: &str, template: &str) -> bool {
    match template.split_once('#') {
        None => id == template,
        Some((pre, post)) => id
            .strip_prefix(pre)
            .and_then(|r| r.strip_suffix(post))
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())),
    }
}

pub fn audit_dataset(ds: &Dataset) -> AuditReport {
    let mut findings = Vec::new();
    let scenario = match parse_scenario(&ds.manifest.scenario) {
        Ok(s) => s,
        Err(e) => {
            return AuditReport {
                coverage: 0.0,
                hallucination: 1.0,
                missing_key_state: 1.0,
                replay_success: 0.0,
                temporal_error: 1.0,
                findings: vec![format!("embedded scenario does not parse: {e}")],
            }
        }
    };
    let rules = RuleBase::new(scenario.rule_list());

    // Coverage.
    let authored: usize = scenario.tasks.iter().map(|t| t.gt.len()).sum();
    let mut covered = 0;
    for t in &scenario.tasks {
        let k = ds.manifest.tasks.iter().position(|m| m.task_id == t.task_id);
        for i in 0..t.gt.len() {
            let ok = k.is_some_and(|k| {
                ds.records[k]
                    .iter()
                    .any(|r| r.step == i && r.exec_meta == ExecMeta::Success && r.skill == t.gt[i])
            });
            if ok {
                covered += 1;
            } else {
                findings.push(format!("task `{}` step {i} has no successful record", t.task_id));
            }
        }
    }

    // Hallucination: every emitted symbol must trace to a declaration.
    let ids: BTreeSet<&str> = scenario
        .areas
        .iter()
        .map(|a| a.id.as_str())
        .chain(scenario.objects.iter().map(|o| o.node.instance_id.as_str()))
        .collect();
    let mut templates = Vec::new();
    for r in &scenario.rules {
        for e in &r.rule.effects {
            if let Effect::Add { id, .. } = e {
                templates.push(id.as_str());
            }
        }
    }
    let labels = scenario.labels();
    let vocab = scenario.vocabulary();
    let mut emitted: BTreeSet<(String, String)> = BTreeSet::new();
    for g in ds.snapshots.values() {
        for n in g.nodes() {
            emitted.insert(("node".into(), n.instance_id.clone()));
            if n.kind != NodeKind::Area {
                emitted.insert(("label".into(), n.label.clone()));
            }
            for (slot, v) in n.slots() {
                match slot {
                    Slot::State => {
                        emitted.insert(("state".into(), v));
                    }
                    Slot::Flag(k) => {
                        emitted.insert(("flag".into(), k));
                    }
                    _ => {}
                }
            }
        }
    }
    for r in ds.all_records() {
        for p in &r.primitives {
            emitted.insert(("action".into(), p.action_type.clone()));
        }
    }
    for r in rules.rules() {
        emitted.insert(("rule".into(), format!("{}\u{0}{}", r.rule_id, r.source)));
    }
    for s in &scenario.skills {
        emitted.insert(("skill".into(), format!("{}\u{0}{}", s.skill.skill_id, s.skill.source)));
    }
    let mut hallucinated = 0;
    for (kind, sym) in &emitted {
        let ok = match kind.as_str() {
            "node" => ids.contains(sym.as_str()) || templates.iter().any(|t| matches_template(sym, t)),
            "label" => labels.contains(sym.as_str()),
            "state" => scenario.states.contains(sym),
            "flag" => scenario.flags.contains(sym),
            "action" => vocab.contains(sym.as_str()),
            // Provenance: rules and skills need a non-empty `source`.
            _ => !sym.split('\u{0}').nth(1).unwrap_or("").trim().is_empty(),
        };
        if !ok {
            hallucinated += 1;
            findings.push(format!("untraceable {kind} `{}`", sym.replace('\u{0}', " / ")));
        }
    }

    // Missing key states.
    let mut clauses = 0;
    let mut missing = 0;
    for t in &ds.manifest.tasks {
        let post = ds.snapshots.get(&t.post_state_ref);
        for c in &t.goal.clauses {
            clauses += 1;
            if !post.is_some_and(|g| c.holds(g)) {
                missing += 1;
                findings.push(format!("task `{}`: `{c}` missing at end state", t.task_id));
            }
        }
    }

    // Replay success and temporal order.
    let all: Vec<_> = ds.all_records().collect();
    let mut replayed = 0;
    let mut disordered = 0;
    let mut prev_post = Some(ds.manifest.init_state_ref.clone());
    let mut prev_key: Option<(usize, usize)> = None;
    for (k, recs) in ds.records.iter().enumerate() {
        if ds.manifest.tasks.get(k).map(|m| m.position) != Some(k) {
            findings.push(format!("manifest task {k} is out of position"));
        }
        for r in recs {
            let ok = ds.snapshots.get(&r.pre_state_ref).is_some_and(|pre| {
                let mut g = pre.clone();
                let executed = r
                    .primitives
                    .iter()
                    .all(|a| execute_in_place(&mut g, &rules, a).feedback == Feedback::Success);
                executed
                    && g.snapshot_hash() == r.post_state_ref
                    && r.apply(pre).is_ok_and(|h| h.snapshot_hash() == r.post_state_ref)
            });
            if ok {
                replayed += 1;
            } else {
                findings.push(format!("task `{}` step {}: replay mismatch", r.task_id, r.step));
            }
            let key = (k, r.step);
            let in_order = prev_key.is_none_or(|p| key > p)
                && prev_post.as_ref() == Some(&r.pre_state_ref)
                && ds.manifest.tasks.get(k).is_some_and(|m| m.task_id == r.task_id);
            if !in_order {
                disordered += 1;
                findings.push(format!("task `{}` step {}: out of temporal order", r.task_id, r.step));
            }
            prev_key = Some(key);
            prev_post = Some(r.post_state_ref.clone());
        }
    }

    AuditReport {
        coverage: if authored == 0 {
            1.0
        } else {
            covered as f64 / authored as f64
        },
        hallucination: rate(hallucinated, emitted.len()),
        missing_key_state: rate(missing, clauses),
        replay_success: if all.is_empty() {
            1.0
        } else {
            replayed as f64 / all.len() as f64
        },
        temporal_error: rate(disordered, all.len()),
        findings,
    }
}
