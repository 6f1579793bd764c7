//! Integer synchronization offsets between two videos of the same scene,
//! computed from per-frame embeddings via a frame similarity matrix.

pub mod datagen;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod nn;
pub mod predictors;
pub mod simmatrix;

pub use error::{Error, Result};
