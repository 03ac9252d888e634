//! Locality-based explanations of latent embeddings.
//!
//! The pipeline places centrality-matched localities over an embedding
//! ([`placement`]), describes each locality by the absolute Spearman
//! correlations of the original features ([`correlation`]), factorizes those
//! descriptions into reoccurring correlation modules with max-composition
//! ([`amf`]), picks a stable module count ([`selection`]) and then analyses
//! and renders the result ([`analysis`], [`render`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amf;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod correlation;
pub mod direct;
mod error;
pub mod io;
pub mod kmeans;
pub mod matrix;
pub mod neighbors;
pub mod placement;
pub mod render;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod synthetic;

pub use amf::{AmfConfig, AmfModel, AmfRunResult};
pub use config::{load_config, AnalysisConfig, PipelineConfig};
pub use correlation::{CorrelationDataset, PairIndex};
pub use error::{LavaError, Result};
pub use io::{EmbeddingMatrix, FeatureMatrix, SampleLabels};
pub use matrix::Matrix;
pub use placement::{LocalitySet, PlacementConfig};
pub use render::{GridLayout, RenderSpec};
pub use selection::{SelectionConfig, SelectionReport};
