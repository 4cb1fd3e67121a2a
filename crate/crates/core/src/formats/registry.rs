//! Named export codecs, looked up at runtime by the CLI and the service.

use std::collections::BTreeMap;

use crate::model::AnnotationSet;

use super::coco::{coco_to_dota, dota_to_coco, CocoDocument};
use super::dota::{read_dota, write_dota, DotaSidecar};
use super::FormatError;

/// A file inside an export, path relative to the export root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

pub trait ExportCodec: Send + Sync {
    fn name(&self) -> &'static str;

    /// Files for `sets`, in a fixed order for a fixed input.
    fn export(&self, sets: &[AnnotationSet]) -> Vec<ExportFile>;

    fn import(&self, files: &[ExportFile]) -> Result<Vec<AnnotationSet>, FormatError>;
}

pub struct DotaCodec;

impl ExportCodec for DotaCodec {
    fn name(&self) -> &'static str {
        "dota"
    }

    fn export(&self, sets: &[AnnotationSet]) -> Vec<ExportFile> {
        let mut sorted: Vec<&AnnotationSet> = sets.iter().collect();
        sorted.sort_by(|a, b| a.diagram_id.cmp(&b.diagram_id));
        sorted
            .into_iter()
            .flat_map(|s| {
                let (text, sidecar) = write_dota(s);
                [
                    ExportFile {
                        path: format!("{}.txt", s.diagram_id),
                        bytes: text.into_bytes(),
                    },
                    ExportFile {
                        path: format!("{}.json", s.diagram_id),
                        bytes: sidecar.into_bytes(),
                    },
                ]
            })
            .collect()
    }

    fn import(&self, files: &[ExportFile]) -> Result<Vec<AnnotationSet>, FormatError> {
        let by_path: BTreeMap<&str, &ExportFile> = files.iter().map(|f| (f.path.as_str(), f)).collect();
        let mut out = Vec::new();
        for (path, f) in &by_path {
            let Some(stem) = path.strip_suffix(".txt") else {
                continue;
            };
            let side = by_path
                .get(format!("{stem}.json").as_str())
                .ok_or_else(|| FormatError::parse(format!("{path}: missing sidecar {stem}.json")))?;
            let sidecar: DotaSidecar =
                serde_json::from_slice(&side.bytes).map_err(|e| FormatError::parse(format!("{stem}.json: {e}")))?;
            let text = std::str::from_utf8(&f.bytes).map_err(|e| FormatError::parse(format!("{path}: {e}")))?;
            out.push(read_dota(text, &sidecar)?);
        }
        Ok(out)
    }
}

pub struct CocoCodec;

pub const COCO_FILE: &str = "annotations.json";

impl ExportCodec for CocoCodec {
    fn name(&self) -> &'static str {
        "coco"
    }

    fn export(&self, sets: &[AnnotationSet]) -> Vec<ExportFile> {
        let mut sorted: Vec<AnnotationSet> = sets.to_vec();
        sorted.sort_by(|a, b| a.diagram_id.cmp(&b.diagram_id));
        let doc = dota_to_coco(&sorted);
        let mut text = serde_json::to_string_pretty(&doc).expect("coco serializes");
        text.push('\n');
        vec![ExportFile {
            path: COCO_FILE.to_string(),
            bytes: text.into_bytes(),
        }]
    }

    fn import(&self, files: &[ExportFile]) -> Result<Vec<AnnotationSet>, FormatError> {
        let f = files
            .iter()
            .find(|f| f.path == COCO_FILE)
            .ok_or_else(|| FormatError::parse(format!("missing {COCO_FILE}")))?;
        let doc: CocoDocument = serde_json::from_slice(&f.bytes).map_err(|e| FormatError::parse(e.to_string()))?;
        coco_to_dota(&doc)
    }
}

pub struct CodecRegistry {
    codecs: BTreeMap<&'static str, Box<dyn ExportCodec>>,
}

impl CodecRegistry {
    pub fn empty() -> Self {
        CodecRegistry {
            codecs: BTreeMap::new(),
        }
    }

    /// Registers a codec, replacing any codec of the same name.
    pub fn register(&mut self, codec: Box<dyn ExportCodec>) {
        self.codecs.insert(codec.name(), codec);
    }

    pub fn get(&self, name: &str) -> Option<&dyn ExportCodec> {
        self.codecs.get(name).map(|c| c.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.codecs.keys().copied().collect()
    }
}

impl Default for CodecRegistry {
    fn default() -> Self {
        let mut r = CodecRegistry::empty();
        r.register(Box::new(DotaCodec));
        r.register(Box::new(CocoCodec));
        r
    }
}
