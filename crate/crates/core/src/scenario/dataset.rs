use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{compile_episode, parse_scenario, CompileError, Episode, TransitionRecord};
use crate::eval::slots::SlotRef;
use crate::graph::{Digest, GraphError, WorldGraph};
use crate::rules::PrimitiveAction;
use crate::task::{GoalPredicate, KeyAction, SkillCall};

pub const DATASET_FORMAT: &str = "hwsim-dataset/1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("embedded scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("recompiled init digest {actual} differs from manifest {expected}")]
    InitMismatch { expected: Digest, actual: Digest },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestTask {
    pub position: usize,
    pub task_id: String,
    pub instruction: String,
    pub goal: GoalPredicate,
    pub key_actions: Vec<KeyAction>,
    pub gt_skills: Vec<SkillCall>,
    pub gt_chain: Vec<PrimitiveAction>,
    pub pre_state_ref: Digest,
    pub post_state_ref: Digest,
    pub changed_slots: Vec<SlotRef>,
    pub record_file: String,
}

/// Episode manifest. Embeds the scenario text so the directory is self-contained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub episode_id: String,
    pub scenario_digest: Digest,
    pub init_state_ref: Digest,
    pub tasks: Vec<ManifestTask>,
    pub scenario: String,
}

impl Manifest {
    pub fn of(ep: &Episode) -> Self {
        Self {
            format: DATASET_FORMAT.to_string(),
            episode_id: ep.episode_id.clone(),
            scenario_digest: Digest::of_bytes(ep.scenario.source_text.as_bytes()),
            init_state_ref: ep.init_digest(),
            tasks: ep
                .tasks
                .iter()
                .enumerate()
                .map(|(k, t)| ManifestTask {
                    position: k,
                    task_id: t.task_id.clone(),
                    instruction: t.instruction.clone(),
                    goal: t.goal.clone(),
                    key_actions: t.key_actions.clone(),
                    gt_skills: t.gt_skills.clone(),
                    gt_chain: ep.gt_chains[k].clone(),
                    pre_state_ref: ep.gt_pre[k].snapshot_hash(),
                    post_state_ref: ep.gt_post[k].snapshot_hash(),
                    changed_slots: ep.changed_slots[k].iter().cloned().collect(),
                    record_file: record_file_name(k, &t.task_id),
                })
                .collect(),
            scenario: ep.scenario.source_text.clone(),
        }
    }

    /// Recompiles the embedded scenario and checks it still yields the same init.
    pub fn episode(&self) -> Result<Episode, DatasetError> {
        let s = parse_scenario(&self.scenario).map_err(|e| DatasetError::Scenario(e.to_string()))?;
        let (ep, _) = compile_episode(&s)?;
        if ep.init_digest() != self.init_state_ref {
            return Err(DatasetError::InitMismatch {
                expected: self.init_state_ref.clone(),
                actual: ep.init_digest(),
            });
        }
        Ok(ep)
    }

    pub fn from_json(path: &Path, text: &str) -> Result<Self, DatasetError> {
        let m: Manifest = serde_json::from_str(text).map_err(|e| format_err(path, e))?;
        if m.format != DATASET_FORMAT {
            return Err(DatasetError::Format {
                path: path.to_path_buf(),
                message: format!("unsupported format `{}`", m.format),
            });
        }
        Ok(m)
    }
}

fn format_err(path: &Path, e: impl ToString) -> DatasetError {
    DatasetError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn record_file_name(position: usize, task_id: &str) -> String {
    format!("records/{position:02}_{task_id}.json")
}

/// A compiled dataset as laid out on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    /// Snapshot files keyed by the digest in their file name.
    pub snapshots: BTreeMap<Digest, WorldGraph>,
    /// Records per task, in manifest order.
    pub records: Vec<Vec<TransitionRecord>>,
}

impl Dataset {
    pub fn new(ep: &Episode, records: &[TransitionRecord]) -> Self {
        let mut snapshots = BTreeMap::new();
        snapshots.entry(ep.init_digest()).or_insert_with(|| ep.init.clone());
        let mut g = ep.init.clone();
        let mut per_task: Vec<Vec<TransitionRecord>> = vec![Vec::new(); ep.tasks.len()];
        for r in records {
            g = r.apply(&g).expect("records compiled from this episode");
            snapshots.entry(r.post_state_ref.clone()).or_insert_with(|| g.clone());
            let k = ep.task_index(&r.task_id).expect("record of a known task");
            per_task[k].push(r.clone());
        }
        Self {
            manifest: Manifest::of(ep),
            snapshots,
            records: per_task,
        }
    }

    pub fn all_records(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.records.iter().flatten()
    }
}

fn write(path: &Path, text: &str) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes `manifest.json`, `snapshots/<digest>.json` and
/// `records/<pos>_<task>.json` under `dir`. Output is byte-stable.
pub fn write_dataset(dir: &Path, ep: &Episode, records: &[TransitionRecord]) -> Result<Dataset, DatasetError> {
    let ds = Dataset::new(ep, records);
    write(&dir.join("manifest.json"), &pretty(&ds.manifest))?;
    for (d, g) in &ds.snapshots {
        write(&dir.join("snapshots").join(format!("{d}.json")), &g.to_canonical_json())?;
    }
    for (t, recs) in ds.manifest.tasks.iter().zip(&ds.records) {
        write(&dir.join(&t.record_file), &pretty(recs))?;
    }
    Ok(ds)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let mpath = dir.join("manifest.json");
    let manifest = Manifest::from_json(&mpath, &read(&mpath)?)?;
    let mut snapshots = BTreeMap::new();
    let sdir = dir.join("snapshots");
    let entries = fs::read_dir(&sdir).map_err(|source| DatasetError::Io {
        path: sdir.clone(),
        source,
    })?;
    let mut paths: BTreeSet<PathBuf> = BTreeSet::new();
    for e in entries {
        let e = e.map_err(|source| DatasetError::Io {
            path: sdir.clone(),
            source,
        })?;
        paths.insert(e.path());
    }
    for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let g = WorldGraph::from_canonical_json(&read(&p)?).map_err(|e| format_err(&p, e))?;
        snapshots.insert(Digest(stem), g);
    }
    let mut records = Vec::new();
    for t in &manifest.tasks {
        let p = dir.join(&t.record_file);
        let recs: Vec<TransitionRecord> = serde_json::from_str(&read(&p)?).map_err(|e| format_err(&p, e))?;
        records.push(recs);
    }
    Ok(Dataset {
        manifest,
        snapshots,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures::MINI, parse_scenario};
    use super::*;

    #[test]
    fn write_read_and_recompile() {
        let (ep, records) = compile_episode(&parse_scenario(MINI).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_dataset(dir.path(), &ep, &records).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.manifest, written.manifest);
        assert_eq!(back.records, written.records);
        assert_eq!(
            back.snapshots.keys().collect::<Vec<_>>(),
            written.snapshots.keys().collect::<Vec<_>>()
        );
        for (d, g) in &back.snapshots {
            assert_eq!(&g.snapshot_hash(), d);
        }
        let ep2 = back.manifest.episode().unwrap();
        assert_eq!(ep2.init_digest(), ep.init_digest());
        assert_eq!(ep2.gt_chains, ep.gt_chains);

        // Byte-identical on a second write.
        let dir2 = tempfile::tempdir().unwrap();
        write_dataset(dir2.path(), &ep, &records).unwrap();
        for t in &written.manifest.tasks {
            assert_eq!(
                fs::read(dir.path().join(&t.record_file)).unwrap(),
                fs::read(dir2.path().join(&t.record_file)).unwrap()
            );
        }
        assert_eq!(
            fs::read(dir.path().join("manifest.json")).unwrap(),
            fs::read(dir2.path().join("manifest.json")).unwrap()
        );
    }
}
