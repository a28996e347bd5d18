//! Scenario harness for the intention-aware semantic uplink simulator:
//! synthetic corpus generation, scripted oracles, scenario execution, and
//! CSV reporting.

pub mod config;
pub mod corpus;
pub mod font;
pub mod oracle;
pub mod report;
pub mod scenario;
