use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{box_from_quad, vertices_of, Quad};
use crate::io::atomic_write;
use crate::model::{AnnotationSet, DiagramKind, DiagramObject, Keypoints, ObjectClass, ObjectId, TextBlock};

use super::FormatError;

/// One DOTA object line.
#[derive(Debug, Clone, PartialEq)]
pub struct DotaRecord {
    pub coords: [f64; 8],
    pub category: ObjectClass,
    pub difficult: bool,
}

impl DotaRecord {
    pub fn parse(line: &str, line_no: usize) -> Result<DotaRecord, FormatError> {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 9 && tokens.len() != 10 {
            return Err(FormatError::at_line(
                line_no,
                format!("expected 9 or 10 fields, found {}", tokens.len()),
            ));
        }
        let mut coords = [0.0; 8];
        for (i, c) in coords.iter_mut().enumerate() {
            *c = tokens[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FormatError::at_line(line_no, format!("bad coordinate {:?}", tokens[i])))?;
        }
        let category = tokens[8]
            .parse::<ObjectClass>()
            .map_err(|_| FormatError::at_line(line_no, format!("unknown category {:?}", tokens[8])))?;
        let difficult = match tokens.get(9) {
            None | Some(&"0") => false,
            Some(&"1") => true,
            Some(other) => {
                return Err(FormatError::at_line(line_no, format!("bad difficulty flag {other:?}")));
            }
        };
        Ok(DotaRecord {
            coords,
            category,
            difficult,
        })
    }

    pub fn to_line(&self) -> String {
        let mut s = String::new();
        for c in self.coords {
            let _ = write!(s, "{} ", fixed6(c));
        }
        let _ = write!(s, "{} {}", self.category, u8::from(self.difficult));
        s
    }
}

fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarObject {
    pub id: ObjectId,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Keypoints>,
}

/// What DOTA cannot carry: set metadata, object ids, scores, keypoints and
/// text blocks. Objects appear in the order of the DOTA lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DotaSidecar {
    pub diagram_id: String,
    pub kind: DiagramKind,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub objects: Vec<SidecarObject>,
    #[serde(default)]
    pub texts: Vec<TextBlock>,
}

impl DotaSidecar {
    /// Metadata only; objects read against it get sequential ids and score 1.
    pub fn bare(diagram_id: impl Into<String>, kind: DiagramKind, width: f64, height: f64) -> Self {
        Self {
            diagram_id: diagram_id.into(),
            kind,
            width,
            height,
            objects: Vec::new(),
            texts: Vec::new(),
        }
    }
}

/// Serializes a set as DOTA text plus sidecar JSON. Objects are written in id
/// order with vertices in `vertices_of` order.
pub fn write_dota(set: &AnnotationSet) -> (String, String) {
    let sorted = set.sorted();
    let mut text = String::new();
    for o in &sorted.objects {
        let record = DotaRecord {
            coords: vertices_of(&o.bbox).coords(),
            category: o.class,
            difficult: false,
        };
        text.push_str(&record.to_line());
        text.push('\n');
    }
    let sidecar = DotaSidecar {
        diagram_id: sorted.diagram_id.clone(),
        kind: sorted.kind,
        width: sorted.width,
        height: sorted.height,
        objects: sorted
            .objects
            .iter()
            .map(|o| SidecarObject {
                id: o.id,
                score: o.score,
                keypoints: o.keypoints,
            })
            .collect(),
        texts: sorted.texts.clone(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    (text, json)
}

/// Parses DOTA text against its sidecar. Header lines (`imagesource:`,
/// `gsd:`) and blank lines are skipped.
pub fn read_dota(text: &str, sidecar: &DotaSidecar) -> Result<AnnotationSet, FormatError> {
    let mut set = AnnotationSet::new(sidecar.diagram_id.clone(), sidecar.kind, sidecar.width, sidecar.height);
    let mut k = 0usize;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with("imagesource:") || t.starts_with("gsd:") {
            continue;
        }
        let r = DotaRecord::parse(t, i + 1)?;
        let quad = Quad::from_coords(r.coords).map_err(|e| FormatError::at_line(i + 1, e.to_string()))?;
        let bbox = box_from_quad(&quad).map_err(|e| FormatError::at_line(i + 1, e.to_string()))?;
        let mut o = DiagramObject::ground_truth(k as ObjectId, r.category, bbox);
        if !sidecar.objects.is_empty() {
            let meta = sidecar
                .objects
                .get(k)
                .ok_or_else(|| FormatError::at_line(i + 1, "more DOTA lines than sidecar objects"))?;
            o.id = meta.id;
            o.score = meta.score;
            o.keypoints = meta.keypoints;
        }
        set.objects.push(o);
        k += 1;
    }
    if !sidecar.objects.is_empty() && k != sidecar.objects.len() {
        return Err(FormatError::parse(format!(
            "sidecar lists {} objects but the DOTA file has {k}",
            sidecar.objects.len()
        )));
    }
    set.texts = sidecar.texts.clone();
    Ok(set)
}

/// Sidecar location for a DOTA file: same stem, `.json` extension.
pub fn sidecar_path(dota: &Path) -> PathBuf {
    dota.with_extension("json")
}

/// Writes `<path>` and its sidecar atomically.
pub fn save_dota(set: &AnnotationSet, path: &Path) -> Result<(), FormatError> {
    let (text, json) = write_dota(set);
    let side = sidecar_path(path);
    atomic_write(path, text.as_bytes()).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    atomic_write(&side, json.as_bytes()).map_err(|source| FormatError::Io { path: side, source })
}

pub fn load_dota(path: &Path) -> Result<AnnotationSet, FormatError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|source| FormatError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    let text = read(path)?;
    let side = sidecar_path(path);
    let sidecar: DotaSidecar = serde_json::from_str(&read(&side)?)
        .map_err(|e| FormatError::parse(format!("sidecar {}: {e}", side.display())))?;
    read_dota(&text, &sidecar)
}
