//! HTTP service and CLI plumbing around `pragmachat-core`: document upload,
//! chat sessions with per-turn metrics, and background A/B experiment jobs,
//! all persisted under one data directory.

pub mod app;
pub mod config;
pub mod error;
pub mod http;
pub mod jobs;
pub mod persist;
pub mod session;

pub use app::App;
pub use config::AppConfig;
pub use error::ServiceError;
