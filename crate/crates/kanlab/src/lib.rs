//! Kolmogorov-Arnold network layers with a reproducible experiment harness.
//!
//! Networks here carry learnable univariate functions on their edges — a
//! SiLU base path plus a B-spline, mixed by scalar weights — instead of
//! fixed activations. The crate provides the layers ([`kan`], [`ckan`]),
//! plain conv/linear baselines ([`nn`]), two spline regularizers (a
//! curvature penalty and stochastic chord replacement), dataset utilities
//! ([`data`]), and a deterministic training/experiment harness
//! ([`experiments`]) behind a thin CLI ([`cli`]).
//!
//! The fastest way in is the `examples/` directory; each one runs in
//! seconds with `cargo run --example <name>`:
//!
//! | example | shows |
//! |---|---|
//! | `spline_basics` | basis evaluation, partition of unity, derivatives |
//! | `smoothness_penalty` | the curvature Gram matrix as a quadratic form |
//! | `spline_edge_layer` | one trainable edge fitting sin(x) |
//! | `segment_deactivation` | chord-replacement masks and their limit cases |
//! | `conv_spline_activations` | conv layer with per-channel spline activations |
//! | `edge_detection` | spline net vs linear model on the 16-strip edge task |
//! | `function_superposition` | width-2d+1 construction fitting a 2-D function |
//! | `gradient_checking` | finite-difference validation of every architecture |
//! | `train_image_classifier` | end-to-end training plus checkpoint round-trip |
//! | `label_noise_robustness` | corrupted labels degrading generalization |
//! | `regression_regularizers` | both regularizers beating a plain fit |
//! | `reproducible_streams` | named RNG streams and byte-identical re-runs |
//!
//! Determinism is load-bearing throughout: every random choice flows from
//! a run seed through named, derived streams ([`Rng::derive`]), training
//! never reads wall clocks or thread order, and any experiment re-run with
//! the same config and seeds reproduces its CSV byte for byte.

pub mod ckan;
pub mod cli;
pub mod data;
pub mod experiments;
pub mod kan;
pub mod model;
pub mod nn;
pub mod rng;
pub mod spline;
pub mod tensor;

pub use cli::run;
pub use rng::Rng;
pub use spline::{Basis, BasisSpec};
pub use tensor::{Tensor, TensorError};
