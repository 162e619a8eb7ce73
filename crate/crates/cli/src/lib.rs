//! Deterministic benchmark harness for the online conformal methods in
//! `sabcp-core`: plans, cell execution, and report rendering.

pub mod app;
pub mod harness;
pub mod plan;
pub mod report;
