//! Concept activation vector extraction, orthogonal steering and
//! evaluation metrics over precomputed embedding matrices.
//!
//! The crate is organised bottom-up: [`linalg`] holds the dense
//! primitives, [`ingest`] the file formats, sampling and the synthetic
//! planted-concept generator, [`probes`] the linear solvers, [`sae`] the
//! TopK sparse autoencoder, [`cav`] the extraction methods, [`steer`] the
//! interventions, [`metrics`] the evaluation quantities and [`harness`]
//! the config-driven runner used by the `cavbench` binary.

pub mod cav;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod probes;
pub mod sae;
pub mod steer;

pub use cav::{extract, Cav, CavMeta, MethodId};
pub use error::{Error, Result};
pub use ingest::{ConceptDataset, LabelTable, Pairing, Split, SyntheticSpec};
pub use linalg::{EmbeddingMatrix, UnitVector};
pub use sae::SaeParams;
