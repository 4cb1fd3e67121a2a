//! Structure-diagram recognition toolkit: oriented-box geometry, diagram
//! synthesis with exact ground truth, DOTA/COCO conversion, aggregation of
//! detected primitives into relation tuples, and evaluation metrics.

pub mod aggregator;
pub mod detectsim;
pub mod formats;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod model;
pub mod synthesizer;
