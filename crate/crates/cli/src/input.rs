//! Loading annotation sets from whatever the pipeline produced: dataset
//! directories, DOTA pairs, COCO documents, detection files and canonical
//! set JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use diagraph_core::formats::{coco_to_dota, load_dota, read_detections, CocoDocument, CoordinateSpace, DetectionFile};
use diagraph_core::model::{tuples_from_jsonl, AnnotationSet, DiagramKind, RelationTuple};
use diagraph_core::synthesizer::dataset::{ManifestEntry, MANIFEST_FILE};

use crate::error::CliError;
use crate::manifest::RUN_MANIFEST_FILE;

/// Fills in what detection files lack: kind, canvas size and text blocks.
#[derive(Debug, Default)]
pub struct LoadContext {
    pub kind: Option<DiagramKind>,
    pub reference: BTreeMap<String, AnnotationSet>,
}

impl LoadContext {
    pub fn with_reference(kind: Option<DiagramKind>, reference: &[AnnotationSet]) -> Self {
        LoadContext {
            kind,
            reference: reference.iter().map(|s| (s.diagram_id.clone(), s.clone())).collect(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(CliError::io(dir))? {
        out.push(e.map_err(CliError::io(dir))?.path());
    }
    out.sort();
    Ok(out)
}

fn from_detections(path: &Path, doc: &DetectionFile, ctx: &LoadContext) -> Result<AnnotationSet, CliError> {
    let space = CoordinateSpace::parse(&doc.coordinate_space).map_err(|e| CliError::parse(path, e))?;
    let reference = ctx.reference.get(&doc.diagram_id);
    let (kind, width, height) = match (reference, space) {
        (Some(r), _) => (r.kind, r.width, r.height),
        (None, CoordinateSpace::Native) => {
            let kind = ctx.kind.ok_or_else(|| {
                CliError::validation(format!(
                    "{}: detections for {} need --kind or a reference set",
                    path.display(),
                    doc.diagram_id
                ))
            })?;
            (kind, doc.image_width, doc.image_height)
        }
        (None, CoordinateSpace::Scaled1024) => {
            return Err(CliError::validation(format!(
                "{}: scaled detections for {} need a reference set for the native canvas size",
                path.display(),
                doc.diagram_id
            )))
        }
    };
    let mut set = AnnotationSet::new(doc.diagram_id.clone(), kind, width, height);
    set.objects = read_detections(doc, width, height).map_err(|e| CliError::parse(path, e))?;
    if let Some(r) = reference {
        set.texts = r.texts.clone();
    }
    Ok(set)
}

/// Interprets a JSON file by its top-level keys.
fn load_json(path: &Path, ctx: &LoadContext) -> Result<Option<Vec<AnnotationSet>>, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    let has = |k: &str| value.get(k).is_some();
    let sets = if has("images") && has("annotations") {
        let doc: CocoDocument = serde_json::from_value(value).map_err(|e| CliError::parse(path, e))?;
        coco_to_dota(&doc).map_err(|e| CliError::parse(path, e))?
    } else if has("detections") {
        let doc: DetectionFile = serde_json::from_value(value).map_err(|e| CliError::parse(path, e))?;
        vec![from_detections(path, &doc, ctx)?]
    } else if has("objects") && has("kind") {
        vec![serde_json::from_value(value).map_err(|e| CliError::parse(path, e))?]
    } else {
        return Ok(None);
    };
    Ok(Some(sets))
}

fn load_manifest_dir(dir: &Path) -> Result<Vec<AnnotationSet>, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_text(&path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: ManifestEntry =
            serde_json::from_str(line).map_err(|e| CliError::parse(&path, format!("line {}: {e}", i + 1)))?;
        let dota = dir.join(&e.dota_path);
        out.push(load_dota(&dota).map_err(|err| CliError::from_format(&dota, err))?);
    }
    Ok(out)
}

fn load_dir(dir: &Path, ctx: &LoadContext) -> Result<Vec<AnnotationSet>, CliError> {
    if dir.join(MANIFEST_FILE).is_file() {
        return load_manifest_dir(dir);
    }
    let mut out = Vec::new();
    for p in sorted_entries(dir)? {
        if !p.is_file() {
            continue;
        }
        match p.extension().and_then(|e| e.to_str()) {
            Some("txt") => out.push(load_dota(&p).map_err(|e| CliError::from_format(&p, e))?),
            Some("json") if p.with_extension("txt").is_file() => {}
            Some("json") if p.file_name().is_some_and(|n| n == RUN_MANIFEST_FILE) => {}
            Some("json") => match load_json(&p, ctx)? {
                Some(sets) => out.extend(sets),
                None => log::warn!("skipping {}: not an annotation file", p.display()),
            },
            _ => {}
        }
    }
    Ok(out)
}

/// Loads every annotation set under `path`, sorted by diagram id. Duplicate
/// ids are a validation error.
pub fn load_sets(path: &Path, ctx: &LoadContext) -> Result<Vec<AnnotationSet>, CliError> {
    let mut sets = if path.is_dir() {
        load_dir(path, ctx)?
    } else if path.extension().is_some_and(|e| e == "txt") {
        vec![load_dota(path).map_err(|e| CliError::from_format(path, e))?]
    } else {
        load_json(path, ctx)?.ok_or_else(|| CliError::parse(path, "not a DOTA, COCO, detection or set file"))?
    };
    sets.sort_by(|a, b| a.diagram_id.cmp(&b.diagram_id));
    let dups: Vec<String> = sets
        .windows(2)
        .filter(|w| w[0].diagram_id == w[1].diagram_id)
        .map(|w| w[0].diagram_id.clone())
        .collect();
    if !dups.is_empty() {
        return Err(CliError::Validation {
            message: format!("{}: duplicate diagram ids", path.display()),
            details: dups,
        });
    }
    Ok(sets)
}

/// Reads `<diagram_id>.jsonl` tuple files from `dir`, or from its `tuples/`
/// subdirectory when present.
pub fn load_tuple_dir(dir: &Path) -> Result<BTreeMap<String, Vec<RelationTuple>>, CliError> {
    let nested = dir.join("tuples");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut out = BTreeMap::new();
    for p in sorted_entries(&dir)? {
        if p.extension().is_some_and(|e| e == "jsonl") {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let tuples = tuples_from_jsonl(&read_text(&p)?).map_err(|e| CliError::parse(&p, e))?;
            out.insert(id, tuples);
        }
    }
    Ok(out)
}

pub fn read_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}
