//! Synthetic diagram generation: random topologies, layered layout, SVG
//! rendering, exact ground truth and dataset output.

pub mod config;
pub mod dataset;
pub mod ground_truth;
pub mod layout;
pub mod svg;
pub mod topology;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{EntityPool, Palette, PatternWeights, StyleConfig, SynthesisConfig};
pub use dataset::{synthesize_dataset, synthesize_diagram, DatasetManifest, ManifestEntry, SynthesizedDiagram};
pub use ground_truth::emit_ground_truth;
pub use layout::{layout_diagram, DiagramLayout, LayoutViolation};
pub use svg::render_svg;
pub use topology::generate_topology;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("layout failed: {0}")]
    Layout(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
