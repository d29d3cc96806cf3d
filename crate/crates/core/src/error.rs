use std::path::PathBuf;

use thiserror::Error;

/// Failure reading an IDX file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("unsupported image shape {rows}x{cols}, expected 28x28")]
    BadShape { rows: usize, cols: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error("cannot read {path}: {source}{hint}")]
    Path {
        path: PathBuf,
        source: std::io::Error,
        hint: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("policy file error: {0}")]
    PolicyFormat(String),

    #[error("mean-field iteration did not converge after {iterations} iterations (beta={beta}, n_bar={n_bar}, coupling={coupling}, b_ext={b_ext}, last mu={last_mu})")]
    NoConvergence {
        iterations: usize,
        beta: f64,
        n_bar: f64,
        coupling: f64,
        b_ext: f64,
        last_mu: f64,
    },

    #[error("range error: {0}")]
    Range(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
