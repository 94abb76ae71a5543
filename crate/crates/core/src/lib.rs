//! Uncertainty-aware poet profiling over verse-level multi-label annotations.
//!
//! The pipeline runs in stages that mirror the modules of this crate:
//!
//! | Module | Stage |
//! |--------|-------|
//! | [`ingest`] | load, normalize, dedup and validate `<POET>_labels.jsonl` files |
//! | [`gateway`] | schema enforcement and bounded retry against a text backend |
//! | [`aggregate`] | Poet × Concept mass, smoothed distributions, lifts, ABSTAIN augmentation |
//! | [`stats`] | KL / JS / cosine, rank and linear correlation, bootstrap |
//! | [`spectral`] | co-occurrence graph, Laplacians, Jacobi eigensolver, Eigenmood coordinates, retrieval |
//! | [`validation`] | two-annotator agreement, adjudication, PRF1, calibration, coverage–risk |
//!
//! [`table`] holds the CSV conventions shared by every report and [`config`]
//! the serialized run configuration.

pub mod aggregate;
pub mod concept;
pub mod config;
pub mod error;
pub mod gateway;
pub mod ingest;
pub mod spectral;
pub mod stats;
pub mod table;
pub mod validation;

pub use aggregate::{
    concept_lift, global_baseline, poet_concept_mass, to_distribution, ConceptDistribution,
    LiftProfile, PoetConceptMatrix, WeightKind, WeightPolicy, EPSILON,
};
pub use concept::{Category, Concept};
pub use error::{Error, Result};
pub use ingest::{AnnotatedVerse, Corpus, NormalizationPolicy, VerseRef};
pub use spectral::{LaplacianKind, SpectralModel};
