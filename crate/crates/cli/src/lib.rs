//! Scenario ingestion, pipeline orchestration, report emission and the
//! acceptance gate for the Bernoulli-shift type laboratory.

pub mod acceptance;
pub mod pipeline;
pub mod scenario;
