//! Desk-scale emulation of a three-tier sensor network for monitoring
//! heritage exhibits: battery-powered sensor nodes, an edge hub that
//! classifies visitor behaviour and purges raw images, and a file-backed
//! cloud tier for storage, parsing, and cost accounting.
//!
//! Everything runs on a single simulated clock. Given the same
//! configuration, environment script, and seed, a run produces a
//! byte-identical event ledger, which is what the integration suite
//! leans on.

pub mod audit;
pub mod checksum;
pub mod cloud;
pub mod config;
pub mod fixtures;
pub mod hub;
pub mod nodes;
pub mod scenario;
pub mod status;
pub mod transport;
pub mod vision;

pub use config::{ChangeSet, HubSettings, NodeSpec, Transport, ValidatedConfig, WsnConfig};
pub use hub::{Category, EventLedger, Hub, LedgerEntry, StatusReport};
pub use nodes::{
    EnvironmentScript, GroundTruth, ImageCapture, PowerProfile, SensorKind, SensorReading,
    TriggerCause, TriggerEvent,
};
pub use scenario::{Acceleration, RunReport, ScenarioSpec};
pub use vision::{BehaviorLabel, ConfusionMatrix, LabelScheme};
