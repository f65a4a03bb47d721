//! Deceptive review detection.
//!
//! The crate covers the whole offline pipeline: corpus ingestion and
//! splitting ([`corpus`]), feature extraction ([`features`]), linear and
//! neural classifiers trained from scratch ([`models`]) and the k-fold and
//! bootstrap validation protocols ([`eval`]). Independent work items fan out
//! through [`exec`], which uses rayon when the `parallel` feature is enabled.

pub mod artifact;
pub mod corpus;
pub mod eval;
pub mod exec;
pub mod features;
pub mod models;
pub mod synth;
pub mod tensor;

pub use exec::ExecMode;
