//! Cross-sensor vessel trajectory association.
//!
//! Trajectories from a positional broadcast sensor (modality A) and a camera
//! tracker (modality B) are windowed, embedded by a graph-attention network,
//! scored pairwise and matched one-to-one.

pub mod affine;
pub mod dataset;
pub mod assign;
pub mod baselines;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod loss;
pub mod matching;
pub mod metrics;
pub mod sim;
pub mod train;
pub mod net;
pub mod trajectory;

pub use error::{CoreError, Result};
