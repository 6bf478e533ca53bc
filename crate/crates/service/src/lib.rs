//! Operational front end for the matching engine: a command line covering
//! the train → index → evaluate → serve lifecycle, and an HTTP API for
//! matching and for capturing auditor verdicts.
//!
//! The server never trains. It holds one checkpoint, one index and one
//! corpus, all read-only, plus an append-only annotation store with a
//! single writer.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod plan;
pub mod store;
pub mod wire;

pub use error::{ServiceError, ServiceResult};
