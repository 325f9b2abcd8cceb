//! Blind source separation for vector- and tensor-valued time series.
//!
//! The tensor estimators TSOBI, TgFOBI and TgJADE whiten each mode with its
//! mode covariance and then jointly diagonalize lagged second- or
//! fourth-order mode moments. SOBI, gFOBI and gJADE (and the zero-lag FOBI,
//! JADE, TFOBI and TJADE) are included for comparison, together with the
//! simulation models, the minimum distance index and a benchmark harness.
//!
//! Tensors are stored with the first index varying fastest and modes are
//! numbered from zero.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bss;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod moments;
pub mod simgen;
pub mod tensor;

pub use bss::{apply_unmixing, unmix, unmix_tensor, unmix_vector, Method, MethodConfig, UnmixingResult};
pub use error::{BssError, Result};
pub use eval::{kron_unmixing, kurtosis_rank, mdi};
pub use moments::LagSet;
pub use simgen::{MixingKind, Setting};
pub use tensor::{Matrix, Tensor, TensorSeries};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
