//! File-backed annotation store. Layout under the root:
//!
//! ```text
//! <diagram_id>/diagram.json        kind and canvas size
//! <diagram_id>/diagram.svg
//! <diagram_id>/reference.json      optional ground truth, input to simulated auto-annotation
//! <diagram_id>/revisions/000001.json ...
//! ```
//!
//! Revisions are append-only and numbered contiguously from 1. Writes to one
//! diagram hold that diagram's lock; reads take no lock.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use diagraph_core::formats::load_dota;
use diagraph_core::io::atomic_write;
use diagraph_core::model::{validate, AnnotationSet, DiagramKind, Violation};
use diagraph_core::synthesizer::dataset::{ManifestEntry, MANIFEST_FILE};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Author recorded on revisions produced by auto-annotation.
pub const AUTO_AUTHOR: &str = "auto-annotate";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown diagram {0}")]
    NotFound(String),
    #[error("diagram {id} has no revision {version}")]
    NoRevision { id: String, version: u64 },
    #[error("version conflict: expected {expected}, current is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("annotation set fails validation ({} violations)", violations.len())]
    Invalid { violations: Vec<Violation> },
    #[error("{0}")]
    BadRequest(String),
    #[error("diagram {0} already exists")]
    Exists(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramInfo {
    pub diagram_id: String,
    pub kind: DiagramKind,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRevision {
    pub diagram_id: String,
    pub version: u64,
    pub set: AnnotationSet,
    pub author: String,
    /// RFC 3339, UTC.
    pub created_at: String,
    /// None for version 1.
    pub parent_version: Option<u64>,
    /// Violations the author accepted when storing an invalid set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acknowledged_violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramSummary {
    pub diagram_id: String,
    pub kind: DiagramKind,
    pub latest_version: u64,
    /// Revisions written by people rather than auto-annotation.
    pub correction_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

/// A set to append plus what to do if it fails validation.
#[derive(Debug, Clone)]
pub struct NewRevision {
    pub set: AnnotationSet,
    pub author: String,
    pub acknowledge_violations: bool,
}

/// Diagram ids become directory names, so only a safe alphabet is accepted.
pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 200
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadRequest(format!("invalid diagram id {id:?}")))
    }
}

fn revision_file(version: u64) -> String {
    format!("{version:06}.json")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("store records serialize");
    s.push('\n');
    s.into_bytes()
}

pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Store {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        let d = self.root.join(id);
        if d.join("diagram.json").is_file() {
            Ok(d)
        } else {
            Err(StoreError::NotFound(id.to_string()))
        }
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Registers a diagram. `reference` is the ground truth used by
    /// simulated auto-annotation and as the text source for detection files.
    pub fn add_diagram(&self, svg: &str, reference: &AnnotationSet) -> Result<DiagramInfo, StoreError> {
        let id = reference.diagram_id.as_str();
        check_id(id)?;
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let d = self.root.join(id);
        if d.join("diagram.json").is_file() {
            return Err(StoreError::Exists(id.to_string()));
        }
        let info = DiagramInfo {
            diagram_id: id.to_string(),
            kind: reference.kind,
            width: reference.width,
            height: reference.height,
        };
        let svg_path = d.join("diagram.svg");
        atomic_write(&svg_path, svg.as_bytes()).map_err(io_err(&svg_path))?;
        let ref_path = d.join("reference.json");
        atomic_write(&ref_path, &pretty(reference)).map_err(io_err(&ref_path))?;
        fs::create_dir_all(d.join("revisions")).map_err(io_err(&d))?;
        let meta = d.join("diagram.json");
        atomic_write(&meta, &pretty(&info)).map_err(io_err(&meta))?;
        Ok(info)
    }

    /// Registers every diagram of a synthesized dataset directory; returns
    /// how many were added. Diagrams already present are skipped.
    pub fn import_dataset(&self, dir: &Path) -> Result<usize, StoreError> {
        let manifest = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
        let mut added = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let e: ManifestEntry = serde_json::from_str(line).map_err(|err| StoreError::Corrupt {
                path: manifest.clone(),
                message: err.to_string(),
            })?;
            let dota = dir.join(&e.dota_path);
            let set = load_dota(&dota).map_err(|err| StoreError::Corrupt {
                path: dota.clone(),
                message: err.to_string(),
            })?;
            let svg_path = dir.join(&e.svg_path);
            let svg = fs::read_to_string(&svg_path).map_err(io_err(&svg_path))?;
            match self.add_diagram(&svg, &set) {
                Ok(_) => added += 1,
                Err(StoreError::Exists(id)) => log::debug!("{id} already imported"),
                Err(err) => return Err(err),
            }
        }
        Ok(added)
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for e in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let p = e.map_err(io_err(&self.root))?.path();
            if p.join("diagram.json").is_file() {
                if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn info(&self, id: &str) -> Result<DiagramInfo, StoreError> {
        read_json(&self.dir(id)?.join("diagram.json"))
    }

    pub fn svg(&self, id: &str) -> Result<String, StoreError> {
        let p = self.dir(id)?.join("diagram.svg");
        fs::read_to_string(&p).map_err(io_err(&p))
    }

    pub fn reference(&self, id: &str) -> Result<Option<AnnotationSet>, StoreError> {
        let p = self.dir(id)?.join("reference.json");
        if p.is_file() {
            read_json(&p).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Number of stored revisions, checking that they are contiguous.
    fn current_version(&self, dir: &Path) -> Result<u64, StoreError> {
        let rev_dir = dir.join("revisions");
        let mut versions = Vec::new();
        for e in fs::read_dir(&rev_dir).map_err(io_err(&rev_dir))? {
            let p = e.map_err(io_err(&rev_dir))?.path();
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if p.extension().is_some_and(|x| x == "json") {
                if let Ok(v) = stem.parse::<u64>() {
                    versions.push(v);
                }
            }
        }
        versions.sort_unstable();
        if versions.iter().enumerate().any(|(i, &v)| v != i as u64 + 1) {
            return Err(StoreError::Corrupt {
                path: rev_dir,
                message: format!("revisions are not contiguous: {versions:?}"),
            });
        }
        Ok(versions.len() as u64)
    }

    pub fn latest_version(&self, id: &str) -> Result<u64, StoreError> {
        self.current_version(&self.dir(id)?)
    }

    pub fn revision(&self, id: &str, version: u64) -> Result<AnnotationRevision, StoreError> {
        let p = self.dir(id)?.join("revisions").join(revision_file(version));
        if !p.is_file() {
            return Err(StoreError::NoRevision {
                id: id.to_string(),
                version,
            });
        }
        read_json(&p)
    }

    pub fn latest(&self, id: &str) -> Result<Option<AnnotationRevision>, StoreError> {
        match self.latest_version(id)? {
            0 => Ok(None),
            v => self.revision(id, v).map(Some),
        }
    }

    pub fn history(&self, id: &str) -> Result<Vec<AnnotationRevision>, StoreError> {
        (1..=self.latest_version(id)?).map(|v| self.revision(id, v)).collect()
    }

    pub fn summary(&self, id: &str) -> Result<DiagramSummary, StoreError> {
        let info = self.info(id)?;
        let history = self.history(id)?;
        Ok(DiagramSummary {
            diagram_id: info.diagram_id,
            kind: info.kind,
            latest_version: history.len() as u64,
            correction_count: history.iter().filter(|r| r.author != AUTO_AUTHOR).count(),
        })
    }

    pub fn list(&self, offset: usize, limit: usize) -> Result<Page<DiagramSummary>, StoreError> {
        let ids = self.ids()?;
        let items = ids
            .iter()
            .skip(offset)
            .take(limit)
            .map(|id| self.summary(id))
            .collect::<Result<_, _>>()?;
        Ok(Page {
            items,
            total: ids.len(),
            offset,
            limit,
        })
    }

    /// Appends a revision if `expected_version` is still current (`None`
    /// accepts whatever is current). The set must belong to this diagram and
    /// pass validation unless its violations are acknowledged.
    pub fn append(
        &self,
        id: &str,
        expected_version: Option<u64>,
        rev: NewRevision,
    ) -> Result<AnnotationRevision, StoreError> {
        let dir = self.dir(id)?;
        let info: DiagramInfo = read_json(&dir.join("diagram.json"))?;
        let set = rev.set;
        if set.diagram_id != id {
            return Err(StoreError::BadRequest(format!(
                "set is for {}, not {id}",
                set.diagram_id
            )));
        }
        if set.kind != info.kind || set.width != info.width || set.height != info.height {
            return Err(StoreError::BadRequest(format!(
                "set kind or canvas ({} {}x{}) does not match the diagram ({} {}x{})",
                set.kind, set.width, set.height, info.kind, info.width, info.height
            )));
        }
        let violations = validate(&set);
        if !violations.is_empty() && !rev.acknowledge_violations {
            return Err(StoreError::Invalid { violations });
        }

        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.current_version(&dir)?;
        if let Some(expected) = expected_version {
            if expected != current {
                return Err(StoreError::Conflict { expected, current });
            }
        }
        let version = current + 1;
        let revision = AnnotationRevision {
            diagram_id: id.to_string(),
            version,
            set,
            author: rev.author,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            parent_version: (current > 0).then_some(current),
            acknowledged_violations: violations,
        };
        let rev_dir = dir.join("revisions");
        let path = rev_dir.join(revision_file(version));
        let mut tmp = tempfile::NamedTempFile::new_in(&rev_dir).map_err(io_err(&rev_dir))?;
        tmp.write_all(&pretty(&revision)).map_err(io_err(&path))?;
        tmp.as_file().sync_all().map_err(io_err(&path))?;
        tmp.persist_noclobber(&path).map_err(|e| StoreError::Io {
            path: path.clone(),
            source: e.error,
        })?;
        Ok(revision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use diagraph_core::geometry::OrientedBox;
    use diagraph_core::model::{DiagramObject, ObjectClass};

    fn sample() -> AnnotationSet {
        let mut s = AnnotationSet::new("d1", DiagramKind::Organization, 200.0, 100.0);
        s.objects.push(DiagramObject::ground_truth(
            0,
            ObjectClass::Node,
            OrientedBox::new(50.0, 50.0, 40.0, 20.0, 0.0).unwrap(),
        ));
        s
    }

    fn manual(set: AnnotationSet) -> NewRevision {
        NewRevision {
            set,
            author: "reviewer".into(),
            acknowledge_violations: false,
        }
    }

    #[test]
    fn versions_are_contiguous_and_conflicts_leave_store_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.add_diagram("<svg/>", &sample()).unwrap();
        assert_eq!(store.latest_version("d1").unwrap(), 0);
        let r1 = store.append("d1", Some(0), manual(sample())).unwrap();
        assert_eq!((r1.version, r1.parent_version), (1, None));
        let r2 = store.append("d1", Some(1), manual(sample())).unwrap();
        assert_eq!((r2.version, r2.parent_version), (2, Some(1)));
        let err = store.append("d1", Some(1), manual(sample())).unwrap_err();
        assert!(matches!(
            err,
            StoreError::Conflict {
                expected: 1,
                current: 2
            }
        ));
        assert_eq!(store.history("d1").unwrap(), vec![r1, r2]);
    }

    #[test]
    fn invalid_sets_need_acknowledgement() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.add_diagram("<svg/>", &sample()).unwrap();
        let mut bad = sample();
        bad.objects[0].score = 2.0;
        assert!(matches!(
            store.append("d1", Some(0), manual(bad.clone())),
            Err(StoreError::Invalid { .. })
        ));
        let r = store
            .append(
                "d1",
                Some(0),
                NewRevision {
                    acknowledge_violations: true,
                    ..manual(bad)
                },
            )
            .unwrap();
        assert_eq!(r.acknowledged_violations.len(), 1);
    }

    #[test]
    fn unsafe_ids_are_rejected() {
        for id in ["", "../x", ".hidden", "a/b", "a b"] {
            assert!(check_id(id).is_err(), "{id}");
        }
        assert!(check_id("ownership-000001").is_ok());
    }

    #[test]
    fn concurrent_appends_admit_one_winner() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        store.add_diagram("<svg/>", &sample()).unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let s = store.clone();
                std::thread::spawn(move || s.append("d1", Some(0), manual(sample())).is_ok())
            })
            .collect();
        let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|&w| w).count();
        assert_eq!(wins, 1);
        assert_eq!(store.latest_version("d1").unwrap(), 1);
    }
}
