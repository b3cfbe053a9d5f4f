//! Deterministic discrete-event simulator of a hierarchical wireless sensor
//! network defending against sleep-deprivation attacks.
//!
//! A run is fully described by a [`ScenarioConfig`] and produces a
//! [`RunTrace`]; everything else (metrics, audits) is derived from the trace.

pub mod attacker;
pub mod config;
pub mod detection;
pub mod energy;
pub mod engine;
pub mod metrics;
pub mod protocol;
pub mod replay;
pub mod roles;
pub mod sim;
pub mod topology;
pub mod trace;

pub use config::{ScenarioConfig, Validated};
pub use metrics::{compare, compute, RunMetrics};
pub use replay::{verify, ReplayReport};
pub use sim::{run, run_with_detection, SimError};
pub use trace::RunTrace;
