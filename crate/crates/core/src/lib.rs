//! Tooling for research depositions that follow the ARTS open framework
//! (Archival, Reproducible, Transparent Science).
//!
//! The crate is organised around the checks a deposition has to pass:
//!
//! * [`envconfig`] parses and resolves the `config.env` contract.
//! * [`deposition`] hashes, validates and packages the file tree.
//! * [`tsa`] speaks RFC 3161 to a timestamp authority and keeps `timestamps.json`.
//! * [`gitlayer`] checks bare repositories for dumb-HTTP servability.
//! * [`runner`] checks the container workflow contract and runs the declared commands.
//! * [`report`] aggregates everything into a compliance report.
//! * [`tickdrift`] is the reference workload: watch tick drift estimation.

pub mod deposition;
pub mod der;
pub mod envconfig;
pub mod gitlayer;
pub mod report;
pub mod runner;
pub mod tickdrift;
pub mod tsa;

/// Version string embedded in manifests, reports and machine output.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
