use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats::dota::{sidecar_path, write_dota};
use crate::io::atomic_write;
use crate::model::{AnnotationSet, DiagramKind, Topology};

use super::config::SynthesisConfig;
use super::ground_truth::emit_ground_truth;
use super::layout::{layout_diagram, DiagramLayout};
use super::svg::render_svg;
use super::topology::generate_topology;
use super::SynthError;

/// Everything produced for one diagram seed.
#[derive(Debug, Clone)]
pub struct SynthesizedDiagram {
    pub topology: Topology,
    pub layout: DiagramLayout,
    pub svg: String,
    pub ground_truth: AnnotationSet,
}

pub fn synthesize_diagram(
    kind: DiagramKind,
    config: &SynthesisConfig,
    seed: u64,
) -> Result<SynthesizedDiagram, SynthError> {
    let topology = generate_topology(kind, config, seed)?;
    let layout = layout_diagram(&topology, &config.style, seed)?;
    let svg = render_svg(&layout);
    let ground_truth = emit_ground_truth(&layout);
    Ok(SynthesizedDiagram {
        topology,
        layout,
        svg,
        ground_truth,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub diagram_id: String,
    /// Relative to the dataset directory.
    pub svg_path: String,
    pub dota_path: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub kind: DiagramKind,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    /// Location of `manifest.jsonl`.
    pub path: PathBuf,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("entry serializes") + "\n")
            .collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `count` diagrams under `out_dir`: `svg/<id>.svg`, `dota/<id>.txt`
/// with its `dota/<id>.json` sidecar, and `manifest.jsonl`. Diagram `i` uses
/// seed `seed + i`. Diagrams are generated in parallel; the manifest is
/// written last.
pub fn synthesize_dataset(
    kind: DiagramKind,
    config: &SynthesisConfig,
    count: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest, SynthError> {
    if count == 0 {
        return Err(SynthError::Config("count must be at least 1".into()));
    }
    config.validate()?;
    let entries: Vec<ManifestEntry> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let d = synthesize_diagram(kind, config, s)?;
            let id = d.ground_truth.diagram_id.clone();
            let svg_rel = format!("svg/{id}.svg");
            let dota_rel = format!("dota/{id}.txt");
            let svg_path = out_dir.join(&svg_rel);
            atomic_write(&svg_path, d.svg.as_bytes()).map_err(io_err(&svg_path))?;
            let (text, sidecar) = write_dota(&d.ground_truth);
            let dota_path = out_dir.join(&dota_rel);
            atomic_write(&dota_path, text.as_bytes()).map_err(io_err(&dota_path))?;
            let side = sidecar_path(&dota_path);
            atomic_write(&side, sidecar.as_bytes()).map_err(io_err(&side))?;
            Ok(ManifestEntry {
                diagram_id: id,
                svg_path: svg_rel,
                dota_path: dota_rel,
                seed: s,
            })
        })
        .collect::<Result<_, SynthError>>()?;
    let path = out_dir.join(MANIFEST_FILE);
    let manifest = DatasetManifest {
        kind,
        seed,
        entries,
        path: path.clone(),
    };
    atomic_write(&path, manifest.to_jsonl().as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}
