//! Unrolled reconstruction for ill-posed linear inverse problems.
//!
//! A sparse parallel-beam operator, a synthetic-data pipeline with
//! transmission noise, classical regularizers, denoisers, the unrolled
//! engine with per-step classical/learned blending, diagnostics, and a
//! batch runner.

pub mod classical_reg;
pub mod cli_runner;
pub mod data_pipeline;
pub mod denoiser;
pub mod diagnostics;
pub mod error;
pub mod forward_model;
pub mod linalg;
pub mod types;
pub mod unrolled;

mod binio;

pub use error::{Error, Result};
pub use forward_model::SparseOperator;
pub use types::{Image, Sinogram};

/// Generator used for every seeded stream in the crate.
pub type Rng = rand_xoshiro::Xoshiro256PlusPlus;
