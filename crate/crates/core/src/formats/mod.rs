//! Annotation file formats: DOTA text with a JSON sidecar, COCO JSON, and the
//! detection-ingestion format for external detectors.

pub mod coco;
pub mod detections;
pub mod dota;
pub mod registry;

use std::path::PathBuf;

use thiserror::Error;

pub use coco::{coco_to_dota, dota_to_coco, CocoAnnotation, CocoCategory, CocoDocument, CocoImage};
pub use detections::{
    parse_detection_file, read_detections, write_detections, CoordinateSpace, Detection, DetectionFile,
    SCALED_LONG_SIDE,
};
pub use dota::{load_dota, read_dota, save_dota, sidecar_path, write_dota, DotaRecord, DotaSidecar, SidecarObject};
pub use registry::{CocoCodec, CodecRegistry, DotaCodec, ExportCodec, ExportFile};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub(crate) fn parse(message: impl Into<String>) -> Self {
        FormatError::Parse {
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_line(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line: Some(line),
            message: message.into(),
        }
    }
}
