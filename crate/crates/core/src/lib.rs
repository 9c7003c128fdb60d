//! Catalog of pre-trained models and datasets for software engineering work.
//!
//! The crate harvests assets from model hubs, classifies them against a
//! taxonomy of software-engineering tasks, builds a leaderboard from the
//! evaluations reported in model cards, and serves search, export and user
//! workspaces over HTTP.

pub mod api;
pub mod catalog;
pub mod ingest;
pub mod leaderboard;
pub mod query;
pub mod store;
pub mod workspace;
