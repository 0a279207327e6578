//! Evaluation harness for ontology-learning tasks with language models.
//!
//! The pipeline runs ingest, build, render, invoke and score:
//! [`ingest`] parses knowledge sources, [`datasets`] materializes task items,
//! [`prompts`] renders the template catalogs, [`backends`] dispatches prompts,
//! [`eval`] scores responses and [`runner`] ties the stages together.

pub mod backends;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod prompts;
pub mod runner;

pub use error::{Error, Result};
