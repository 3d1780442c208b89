//! Planted-partition sign matrices under random noise and budgeted
//! adversaries, with a spectral and a recursive SDP reconstruction, scored by
//! misclassification against the hidden partition.

pub mod adversary;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod recursive;
pub mod rng;
pub mod sdp;
pub mod spectral;

pub use adversary::{perturb, AdversaryContext, EditLedger, Phase, Strategy};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, TrialRecord};
pub use matrix::{EigenPair, RealMatrix, Spectrum};
pub use metrics::{misclassified_count, MatchResult};
pub use model::{ClusterPartition, ModelParams, PartitionMode};
pub use recursive::{sdp_reconstruct, SdpVariant};
pub use rng::SimRng;
pub use sdp::{SdpOptions, SdpSolution};
pub use spectral::{spectral_cluster, SpectralConfig};
