//! Deployment configuration: parsing, validation, and diffing.
//!
//! A [`WsnConfig`] document describes the hub settings and every node in
//! the network. Hot swaps are expressed as a [`ChangeSet`] computed by
//! [`diff_config`] between two validated configs; the hub applies change
//! sets atomically while a run is in flight.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodes::{PowerProfile, SensorKind};

/// Smallest sampling cadence a periodic node may declare, in seconds.
pub const MIN_CADENCE_S: u64 = 1;

/// Poll interval used for nodes without an override, in seconds.
pub const DEFAULT_POLL_INTERVAL_S: u64 = 60;

/// Refractory window after a trigger fires when the node declares none.
pub const DEFAULT_DEBOUNCE_S: u64 = 5;

/// Normalized sound level above which a sound node trips by default.
pub const DEFAULT_SOUND_THRESHOLD: f64 = 0.5;

/// Link a node uses to reach the hub.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Ble,
    Wifi,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Ble => write!(f, "ble"),
            Transport::Wifi => write!(f, "wifi"),
        }
    }
}

/// Full network description, as read from `wsn_config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsnConfig {
    /// Monotonically increasing document revision, starting at 1.
    pub version: u64,
    pub hub: HubSettings,
    pub nodes: Vec<NodeSpec>,
}

/// Hub-side settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubSettings {
    /// Width of an upload batch window, in seconds.
    pub batch_window_s: u64,
    /// Retries allowed after a failed upload attempt before dead-lettering.
    pub upload_retry_limit: u32,
    /// TCP port for the status endpoint.
    pub status_port: u16,
    /// Interval between liveness polls of each node, in seconds.
    #[serde(default = "default_poll_interval_s")]
    pub poll_interval_s: u64,
    /// Per-node poll intervals that override `poll_interval_s`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub poll_overrides: BTreeMap<u16, u64>,
    /// Interval for hub self-check heartbeat entries; absent disables them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heartbeat_s: Option<u64>,
    /// Interval for housekeeping sweep entries; absent disables them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub housekeeping_s: Option<u64>,
}

fn default_poll_interval_s() -> u64 {
    DEFAULT_POLL_INTERVAL_S
}

impl HubSettings {
    /// Poll interval for one node, honouring overrides.
    pub fn poll_interval_for(&self, node_id: u16) -> u64 {
        self.poll_overrides
            .get(&node_id)
            .copied()
            .unwrap_or(self.poll_interval_s)
    }
}

/// One sensor node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u16,
    pub kind: SensorKind,
    pub transport: Transport,
    /// Sampling cadence in seconds. Required for periodic kinds, invalid
    /// for trigger kinds and cameras.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence_s: Option<u64>,
    /// Distance from the hub in metres, used by the radio path model.
    pub distance_m: f64,
    pub power: PowerProfile,
    /// Refractory window after a trigger fires, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debounce_s: Option<u64>,
    /// Trip level for sound nodes, in [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_threshold: Option<f64>,
}

impl NodeSpec {
    pub fn effective_debounce_s(&self) -> u64 {
        self.debounce_s.unwrap_or(DEFAULT_DEBOUNCE_S)
    }

    pub fn effective_sound_threshold(&self) -> f64 {
        self.sound_threshold.unwrap_or(DEFAULT_SOUND_THRESHOLD)
    }
}

/// A config that passed [`validate_config`]. Nodes are held sorted by id
/// so that downstream artifacts do not depend on document order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedConfig(WsnConfig);

impl ValidatedConfig {
    pub fn get(&self) -> &WsnConfig {
        &self.0
    }

    pub fn into_inner(self) -> WsnConfig {
        self.0
    }
}

impl std::ops::Deref for ValidatedConfig {
    type Target = WsnConfig;

    fn deref(&self) -> &WsnConfig {
        &self.0
    }
}

/// One validation failure, tied to a field and optionally a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node_id: Option<u16>,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn config(field: &str, message: impl Into<String>) -> Self {
        Violation {
            node_id: None,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn node(id: u16, field: &str, message: impl Into<String>) -> Self {
        Violation {
            node_id: Some(id),
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node_id {
            Some(id) => write!(f, "[node {:#06x}] {}: {}", id, self.field, self.message),
            None => write!(f, "[config] {}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid json at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("config failed validation with {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
}

impl ConfigError {
    /// Violations carried by an `Invalid` error, empty otherwise.
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Parse result: the config plus warnings for keys the schema does not
/// know about. Unknown keys are tolerated so configs can round-trip
/// through newer tooling.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub config: WsnConfig,
    pub warnings: Vec<String>,
}

/// Parse a config document from JSON text.
pub fn parse_config(text: &str) -> Result<ParseOutcome, ConfigError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let warnings = unknown_key_warnings(&value);
    let config: WsnConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
    // Duplicate ids make the document ambiguous; that is a schema defect,
    // not a mere validation failure.
    let mut seen = BTreeSet::new();
    for node in &config.nodes {
        if !seen.insert(node.id) {
            return Err(ConfigError::Schema(format!(
                "duplicate node id {:#06x}",
                node.id
            )));
        }
    }
    Ok(ParseOutcome { config, warnings })
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ParseOutcome, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Serialize a config back to pretty JSON. `parse_config` of the result
/// yields an equal value.
pub fn serialize_config(config: &WsnConfig) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}

const ROOT_KEYS: &[&str] = &["version", "hub", "nodes"];
const HUB_KEYS: &[&str] = &[
    "batch_window_s",
    "upload_retry_limit",
    "status_port",
    "poll_interval_s",
    "poll_overrides",
    "heartbeat_s",
    "housekeeping_s",
];
const NODE_KEYS: &[&str] = &[
    "id",
    "kind",
    "transport",
    "cadence_s",
    "distance_m",
    "power",
    "debounce_s",
    "sound_threshold",
];
const POWER_KEYS: &[&str] = &["idle_mah_per_h", "active_mah_per_h"];

fn unknown_key_warnings(doc: &serde_json::Value) -> Vec<String> {
    fn note(
        map: &serde_json::Map<String, serde_json::Value>,
        known: &[&str],
        at: &str,
        out: &mut Vec<String>,
    ) {
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                out.push(format!("unknown key `{at}.{key}` ignored"));
            }
        }
    }

    let mut out = Vec::new();
    let Some(root) = doc.as_object() else {
        return out;
    };
    note(root, ROOT_KEYS, "$", &mut out);
    if let Some(hub) = root.get("hub").and_then(|v| v.as_object()) {
        note(hub, HUB_KEYS, "$.hub", &mut out);
    }
    if let Some(nodes) = root.get("nodes").and_then(|v| v.as_array()) {
        for (i, node) in nodes.iter().enumerate() {
            let Some(node) = node.as_object() else {
                continue;
            };
            let at = format!("$.nodes[{i}]");
            note(node, NODE_KEYS, &at, &mut out);
            if let Some(power) = node.get("power").and_then(|v| v.as_object()) {
                note(power, POWER_KEYS, &format!("{at}.power"), &mut out);
            }
        }
    }
    out
}

/// Collect every validation violation in a config. Nothing short-circuits:
/// callers get the full list in one pass, ordered by node then field.
pub fn check_config(config: &WsnConfig) -> Vec<Violation> {
    let mut out = Vec::new();

    if config.version == 0 {
        out.push(Violation::config("version", "version must be at least 1"));
    }
    if config.nodes.is_empty() {
        out.push(Violation::config("nodes", "at least one node is required"));
    }
    if config.hub.batch_window_s == 0 {
        out.push(Violation::config(
            "hub.batch_window_s",
            "batch window must be positive",
        ));
    }
    if config.hub.poll_interval_s == 0 {
        out.push(Violation::config(
            "hub.poll_interval_s",
            "poll interval must be positive",
        ));
    }
    if config.hub.heartbeat_s == Some(0) {
        out.push(Violation::config(
            "hub.heartbeat_s",
            "heartbeat interval must be positive when set",
        ));
    }
    if config.hub.housekeeping_s == Some(0) {
        out.push(Violation::config(
            "hub.housekeeping_s",
            "housekeeping interval must be positive when set",
        ));
    }
    for (&node_id, &interval) in &config.hub.poll_overrides {
        if interval == 0 {
            out.push(Violation::node(
                node_id,
                "poll_overrides",
                "poll override must be positive",
            ));
        }
    }

    let mut seen = BTreeSet::new();
    for node in &config.nodes {
        if !seen.insert(node.id) {
            out.push(Violation::node(node.id, "id", "duplicate node id"));
        }
    }

    for node in &config.nodes {
        let id = node.id;
        match (node.kind, node.transport) {
            (SensorKind::Camera, Transport::Wifi) => {}
            (SensorKind::Camera, _) => {
                out.push(Violation::node(id, "transport", "camera requires wifi"));
            }
            (kind, Transport::Ble) if kind != SensorKind::Camera => {}
            (kind, _) => {
                out.push(Violation::node(
                    id,
                    "transport",
                    format!("{} requires ble", kind.label()),
                ));
            }
        }

        match (node.kind.is_periodic(), node.cadence_s) {
            (true, None) => out.push(Violation::node(
                id,
                "cadence_s",
                "cadence is required for periodic sensors",
            )),
            (true, Some(c)) if c < MIN_CADENCE_S => out.push(Violation::node(
                id,
                "cadence_s",
                format!("cadence below minimum ({MIN_CADENCE_S} s)"),
            )),
            (false, Some(_)) => out.push(Violation::node(
                id,
                "cadence_s",
                format!("cadence does not apply to {} sensors", node.kind.label()),
            )),
            _ => {}
        }

        if !(node.distance_m > 0.0) {
            out.push(Violation::node(
                id,
                "distance_m",
                "distance must be positive",
            ));
        }

        let p = &node.power;
        if !(p.idle_mah_per_h >= 0.0 && p.active_mah_per_h >= p.idle_mah_per_h) {
            out.push(Violation::node(
                id,
                "power",
                "power must satisfy 0 <= idle <= active",
            ));
        }

        if let Some(t) = node.sound_threshold {
            if !(0.0..=1.0).contains(&t) {
                out.push(Violation::node(
                    id,
                    "sound_threshold",
                    "sound threshold must lie in [0, 1]",
                ));
            }
        }
    }

    out.sort_by(|a, b| {
        (a.node_id, &a.field, &a.message).cmp(&(b.node_id, &b.field, &b.message))
    });
    out
}

/// Validate a parsed config, canonicalizing node order.
pub fn validate_config(config: WsnConfig) -> Result<ValidatedConfig, ConfigError> {
    let violations = check_config(&config);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    let mut config = config;
    config.nodes.sort_by_key(|n| n.id);
    Ok(ValidatedConfig(config))
}

/// Node-level difference between two validated configs. Hub settings and
/// the version counter are out of scope; swaps that touch those take a
/// restart. All three lists are sorted by node id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub added: Vec<NodeSpec>,
    pub removed: Vec<u16>,
    pub modified: Vec<NodeSpec>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.modified.is_empty()
    }
}

pub fn diff_config(old: &ValidatedConfig, new: &ValidatedConfig) -> ChangeSet {
    let old_by_id: BTreeMap<u16, &NodeSpec> = old.nodes.iter().map(|n| (n.id, n)).collect();
    let new_by_id: BTreeMap<u16, &NodeSpec> = new.nodes.iter().map(|n| (n.id, n)).collect();

    let mut change = ChangeSet::default();
    for (id, node) in &new_by_id {
        match old_by_id.get(id) {
            None => change.added.push((*node).clone()),
            Some(prev) if prev != node => change.modified.push((*node).clone()),
            Some(_) => {}
        }
    }
    for id in old_by_id.keys() {
        if !new_by_id.contains_key(id) {
            change.removed.push(*id);
        }
    }
    change
}

/// Apply a change set to a base config. Every referenced id must resolve:
/// a dangling remove or modify rejects the whole change set, and the
/// result is revalidated before it is returned.
pub fn apply_change_set(
    base: &ValidatedConfig,
    change: &ChangeSet,
) -> Result<ValidatedConfig, ConfigError> {
    let mut nodes: BTreeMap<u16, NodeSpec> =
        base.nodes.iter().map(|n| (n.id, n.clone())).collect();

    for id in &change.removed {
        if nodes.remove(id).is_none() {
            return Err(ConfigError::Schema(format!(
                "change set removes unknown node {id:#06x}"
            )));
        }
    }
    for node in &change.modified {
        match nodes.get_mut(&node.id) {
            Some(slot) => *slot = node.clone(),
            None => {
                return Err(ConfigError::Schema(format!(
                    "change set modifies unknown node {:#06x}",
                    node.id
                )));
            }
        }
    }
    for node in &change.added {
        if nodes.insert(node.id, node.clone()).is_some() {
            return Err(ConfigError::Schema(format!(
                "change set adds node {:#06x} which already exists",
                node.id
            )));
        }
    }

    validate_config(WsnConfig {
        version: base.version,
        hub: base.hub.clone(),
        nodes: nodes.into_values().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn sample() -> WsnConfig {
        fixtures::reference_config().into_inner()
    }

    #[test]
    fn round_trips_through_json() {
        let config = sample();
        let text = serialize_config(&config);
        let outcome = parse_config(&text).expect("parses");
        assert_eq!(outcome.config, config);
        assert!(outcome.warnings.is_empty());
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_config("{\n  \"version\": 1,\n  oops\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_field_names_the_field() {
        let err = parse_config(r#"{"version": 1, "hub": {"batch_window_s": 60}, "nodes": []}"#)
            .unwrap_err();
        match err {
            ConfigError::Schema(msg) => assert!(msg.contains("upload_retry_limit"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_warn_but_parse() {
        let mut doc: serde_json::Value =
            serde_json::from_str(&serialize_config(&sample())).unwrap();
        doc["hub"]["flux_capacitor"] = serde_json::json!(true);
        doc["nodes"][0]["color"] = serde_json::json!("teal");
        let outcome = parse_config(&doc.to_string()).expect("still parses");
        assert_eq!(outcome.warnings.len(), 2);
        assert!(outcome
            .warnings
            .iter()
            .any(|w| w.contains("$.hub.flux_capacitor")));
        assert!(outcome.warnings.iter().any(|w| w.contains("$.nodes[0].color")));
    }

    #[test]
    fn duplicate_ids_are_a_schema_error() {
        let mut config = sample();
        let clone = config.nodes[0].clone();
        config.nodes.push(clone);
        let err = parse_config(&serialize_config(&config)).unwrap_err();
        match err {
            ConfigError::Schema(msg) => assert!(msg.contains("duplicate node id"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn camera_on_ble_is_rejected() {
        let mut config = sample();
        let cam = config
            .nodes
            .iter_mut()
            .find(|n| n.kind == SensorKind::Camera)
            .unwrap();
        cam.transport = Transport::Ble;
        let violations = check_config(&config);
        assert!(violations
            .iter()
            .any(|v| v.field == "transport" && v.message.contains("camera requires wifi")));
    }

    #[test]
    fn zero_cadence_is_below_minimum() {
        let mut config = sample();
        let dht = config
            .nodes
            .iter_mut()
            .find(|n| n.kind == SensorKind::TemperatureHumidity)
            .unwrap();
        dht.cadence_s = Some(0);
        let violations = check_config(&config);
        assert!(violations
            .iter()
            .any(|v| v.field == "cadence_s" && v.message.contains("cadence below minimum")));
    }

    #[test]
    fn zero_hub_intervals_are_rejected() {
        let mut config = sample();
        config.hub.heartbeat_s = Some(0);
        config.hub.housekeeping_s = Some(0);
        config.hub.poll_overrides.insert(4, 0);
        let violations = check_config(&config);
        assert!(violations.iter().any(|v| v.field == "hub.heartbeat_s"));
        assert!(violations.iter().any(|v| v.field == "hub.housekeeping_s"));
        assert!(violations
            .iter()
            .any(|v| v.node_id == Some(4) && v.field == "poll_overrides"));
    }

    #[test]
    fn cadence_on_trigger_node_is_rejected() {
        let mut config = sample();
        let pir = config
            .nodes
            .iter_mut()
            .find(|n| n.kind == SensorKind::Pir)
            .unwrap();
        pir.cadence_s = Some(30);
        let violations = check_config(&config);
        assert!(violations
            .iter()
            .any(|v| v.field == "cadence_s" && v.message.contains("does not apply")));
    }

    #[test]
    fn empty_nodes_parses_but_fails_validation() {
        let mut config = sample();
        config.nodes.clear();
        let text = serialize_config(&config);
        let outcome = parse_config(&text).expect("parse is fine");
        let err = validate_config(outcome.config).unwrap_err();
        assert!(err
            .violations()
            .iter()
            .any(|v| v.field == "nodes" && v.message.contains("at least one node")));
    }

    #[test]
    fn all_violations_are_collected_and_ordered() {
        let mut config = sample();
        config.version = 0;
        config.nodes[0].distance_m = -2.0;
        config.nodes[1].power.active_mah_per_h = -1.0;
        let violations = check_config(&config);
        assert_eq!(violations.len(), 3);
        // Config-scope violations sort before node-scope ones, nodes by id.
        assert_eq!(violations[0].node_id, None);
        assert!(violations[0].message.contains("version"));
        assert!(violations.windows(2).all(|w| w[0].node_id <= w[1].node_id));
    }

    #[test]
    fn diff_then_apply_reproduces_target() {
        let base = validate_config(sample()).unwrap();
        let mut other = sample();
        other.nodes.retain(|n| n.kind != SensorKind::Sound);
        other
            .nodes
            .iter_mut()
            .find(|n| n.kind == SensorKind::Pir)
            .unwrap()
            .distance_m = 9.0;
        other.nodes.push(NodeSpec {
            id: 0x0101,
            kind: SensorKind::Pir,
            transport: Transport::Ble,
            cadence_s: None,
            distance_m: 3.0,
            power: PowerProfile {
                idle_mah_per_h: 114.0,
                active_mah_per_h: 114.0,
            },
            debounce_s: None,
            sound_threshold: None,
        });
        let target = validate_config(other).unwrap();

        let change = diff_config(&base, &target);
        assert_eq!(change.added.len(), 1);
        assert_eq!(change.removed.len(), 1);
        assert_eq!(change.modified.len(), 1);

        let rebuilt = apply_change_set(&base, &change).unwrap();
        assert_eq!(rebuilt.get(), target.get());
    }

    #[test]
    fn dangling_modify_rejects_change_set() {
        let base = validate_config(sample()).unwrap();
        let mut ghost = base.nodes[0].clone();
        ghost.id = 0x7777;
        let change = ChangeSet {
            added: vec![],
            removed: vec![],
            modified: vec![ghost],
        };
        assert!(apply_change_set(&base, &change).is_err());
    }

    #[test]
    fn empty_diff_for_identical_configs() {
        let a = validate_config(sample()).unwrap();
        let b = validate_config(sample()).unwrap();
        assert!(diff_config(&a, &b).is_empty());
    }

    #[test]
    fn poll_override_wins_over_default() {
        let hub = sample().hub;
        let overridden = *hub.poll_overrides.keys().next().unwrap();
        assert_eq!(
            hub.poll_interval_for(overridden),
            hub.poll_overrides[&overridden]
        );
        assert_eq!(hub.poll_interval_for(0xfff0), hub.poll_interval_s);
    }
}
