//! Mining contributor interactions from research-software repositories,
//! clustering them into behavioural groups and naming those groups.

pub mod classify;
pub mod cluster;
pub mod ingest;
pub mod metrics;
pub mod personas;
pub mod real;
pub mod report;
pub mod sampling;
pub mod simgen;
pub mod stats;
