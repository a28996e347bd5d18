//! Core library of the intention-aware semantic uplink simulator.
//!
//! The pipeline mirrors a pair of agents: glasses-side preprocessing tools
//! ([`tools`]) feed a resolution-robust latent codec ([`codec`]) whose
//! packed symbols cross a frequency-selective OFDM channel ([`channel`],
//! [`transport`]); a closed-loop controller ([`intent`]) decides what gets
//! captured and transmitted, and [`metrics`] keeps the bandwidth ledger and
//! task-level scores.

pub mod channel;
pub mod codec;
pub mod intent;
pub mod metrics;
pub mod ratio;
pub mod tools;
pub mod transport;

pub use ratio::CompressionRatio;
