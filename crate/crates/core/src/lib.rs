//! Proxy-based distance metric learning.
//!
//! The crate covers the pieces needed to train and evaluate proxy-based
//! embedding models on desk-scale synthetic benchmarks:
//!
//! * [`numgrad`]: dense matrix primitives with hand-written pullbacks.
//! * [`pooling`]: global K-max pooling, spanning max pooling (k = 1) to
//!   average pooling (k = M²).
//! * [`embedder`]: pooling → linear → optional layer norm → L2 head, proxies,
//!   the toy two-moons classifier, checkpoints.
//! * [`losses`]: NCA, ProxyNCA, ProxyNCA++ and NormSoftMax.
//! * [`training`]: class-balanced sampling, two-group SGD, plateau schedule,
//!   the two-stage protocol and gradient diagnostics.
//! * [`evalkit`]: Recall@K, k-means and NMI.
//! * [`data`]: synthetic generators and the dataset file format.

pub mod data;
pub mod embedder;
pub mod error;
pub mod evalkit;
pub mod hexfloat;
pub mod losses;
pub mod numgrad;
pub mod pooling;
pub mod rng;
pub mod training;
mod textfmt;

pub use error::{Error, Result};
pub use numgrad::{GradPair, Matrix};
