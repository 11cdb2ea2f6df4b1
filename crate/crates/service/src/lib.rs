//! HTTP service for interactive identity tracing.
//!
//! Datasets are uploaded as CSV and addressed by a digest of their bytes.
//! Each session is an append-only event log on disk, so a restarted service
//! rebuilds every session exactly. Mutations carry the revision the client
//! last saw and fail with `409` if another write got there first.

pub mod api;
pub mod error;
pub mod model;
pub mod state;
pub mod store;

pub use api::{router, serve};
pub use error::{ApiError, ErrorBody};
pub use model::*;
pub use state::{LoadReport, ServiceConfig, ServiceState, DEFAULT_DISPLAY_THRESHOLD};
pub use store::{LogEvent, Store};
