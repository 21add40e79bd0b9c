//! Minimal dense-tensor reverse-mode differentiation.
//!
//! Covers the fixed operation set needed by the association network: matrix
//! products, elementwise nonlinearities, masked row softmax, layer norm,
//! concatenation, gathers and reductions. Every op has an analytic backward
//! pass; the test suite checks each against central finite differences.

pub mod checkpoint;
pub mod gradcheck;
mod error;
mod graph;
mod params;
mod tensor;

pub use error::{DiffError, Result};
pub use graph::{sigmoid, Graph, Value};
pub use params::{AdamConfig, Param, ParamStore, Session};
pub use tensor::Tensor;
