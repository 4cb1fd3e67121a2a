//! HTTP service for the annotation review workflow: serve diagrams and their
//! auto-annotations, accept versioned corrections, export corrected sets.

pub mod api;
pub mod archive;
pub mod store;

pub use api::{router, AppState};
pub use store::{AnnotationRevision, Store, StoreError};
