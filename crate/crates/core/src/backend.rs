//! Shared pieces of the pluggable backend contracts.

use thiserror::Error;

/// How a backend may be called from worker threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    /// Safe to call from several threads at once.
    Parallel,
    /// The orchestrator must serialise calls.
    Serial,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("backend {backend} failed: {message}")]
pub struct BackendError {
    pub backend: String,
    pub message: String,
}

impl BackendError {
    pub fn new(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            backend: backend.into(),
            message: message.into(),
        }
    }
}
