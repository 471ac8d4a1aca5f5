use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("point x = {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("contour |lambda - {center}| = {radius} passes too close to a zero")]
    ContourTooClose { center: Complex64, radius: f64 },

    #[error("Newton iteration for index {n} did not converge: {reason}")]
    NonConvergence { n: usize, reason: String },

    #[error(
        "completeness check failed on |lambda - {center}| = {radius}: expected {expected} zeros, counted {counted}"
    )]
    Completeness {
        center: Complex64,
        radius: f64,
        expected: usize,
        counted: i64,
    },

    #[error("eigenvalue cluster at index {n} could not be separated")]
    InseparableCluster { n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
