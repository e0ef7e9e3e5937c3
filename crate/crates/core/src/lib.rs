//! Detection of trending and emerging customer issues from two windows of
//! sentence embeddings.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`attend`] tags the primary question of each transcript with a
//!    sentence-level attention pass and yields its embedding.
//! 2. [`whiten`] maps the question embeddings to zero mean and identity
//!    covariance.
//! 3. [`simgraph`] joins questions whose cosine similarity reaches a
//!    threshold.
//! 4. [`centrality`] computes decay centrality and splits it into
//!    same-window and cross-window parts.
//! 5. [`radar`] turns those into trending/emerging scores and extracts
//!    well-separated clusters.
//!
//! [`synth`] generates labelled synthetic data for end-to-end checks.

pub mod attend;
pub mod centrality;
pub mod corpus;
pub mod error;
mod linalg;
pub mod radar;
pub mod simgraph;
pub mod synth;
pub mod whiten;

pub use centrality::{brute_force_split, decay_centrality, split_centrality, CentralityTable};
pub use corpus::{EmbeddingSet, RunConfig, Speaker, Transcript, Window};
pub use error::{Error, ErrorClass, Result};
pub use linalg::{symmetric_eigen, SymmetricEigen};
pub use radar::{detect, ClusterKind, Detection, RadarReport};
pub use simgraph::SimilarityGraph;
pub use synth::{generate, GroundTruth, SynthSpec};
pub use whiten::WhitenModel;
