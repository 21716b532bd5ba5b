//! Sensor node emulation.
//!
//! Nodes are pure functions of the environment script and the simulated
//! clock: periodic kinds sample on cadence boundaries, trigger kinds fire
//! on rising edges of their predicate, and cameras render a synthetic
//! image when the hub commands a capture. Nothing here reads wall time.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::crc32;
use crate::config::NodeSpec;

/// Sensor models the emulation knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    /// Combined temperature and humidity probe (DHT22).
    #[serde(rename = "dht22")]
    TemperatureHumidity,
    /// Passive infrared motion detector (HW-416-B).
    Pir,
    /// Through-beam photoelectric barrier (E3F-R2N1).
    Photoelectric,
    /// Ultrasonic ranger (HC-SR04).
    Ultrasonic,
    /// Sound level detector (KY-038).
    Sound,
    /// Visitor-facing camera (OV2640).
    Camera,
}

impl SensorKind {
    /// Wire name, as used in config files and batch CSVs.
    pub fn label(&self) -> &'static str {
        match self {
            SensorKind::TemperatureHumidity => "dht22",
            SensorKind::Pir => "pir",
            SensorKind::Photoelectric => "photoelectric",
            SensorKind::Ultrasonic => "ultrasonic",
            SensorKind::Sound => "sound",
            SensorKind::Camera => "camera",
        }
    }

    /// Hardware model designation, for human-facing reports.
    pub fn model(&self) -> &'static str {
        match self {
            SensorKind::TemperatureHumidity => "DHT22",
            SensorKind::Pir => "HW-416-B",
            SensorKind::Photoelectric => "E3F-R2N1",
            SensorKind::Ultrasonic => "HC-SR04",
            SensorKind::Sound => "KY-038",
            SensorKind::Camera => "OV2640",
        }
    }

    /// Periodic kinds sample on a cadence and emit readings.
    pub fn is_periodic(&self) -> bool {
        matches!(self, SensorKind::TemperatureHumidity | SensorKind::Ultrasonic)
    }

    /// Trigger kinds watch a predicate and emit events on rising edges.
    pub fn is_trigger(&self) -> bool {
        matches!(
            self,
            SensorKind::Pir | SensorKind::Photoelectric | SensorKind::Sound
        )
    }

    pub fn all() -> [SensorKind; 6] {
        [
            SensorKind::TemperatureHumidity,
            SensorKind::Pir,
            SensorKind::Photoelectric,
            SensorKind::Ultrasonic,
            SensorKind::Sound,
            SensorKind::Camera,
        ]
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Battery draw rates in mAh per hour. Non-camera nodes draw `active`
/// continuously; cameras idle at `idle` and step up to `active` while a
/// capture and its transfer are in flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub idle_mah_per_h: f64,
    pub active_mah_per_h: f64,
}

/// One measured value from a periodic node.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub node_id: u16,
    pub timestamp: u64,
    pub kind: SensorKind,
    pub value: ReadingValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReadingValue {
    TemperatureC(f64),
    HumidityPct(f64),
    DistanceCm(f64),
}

impl ReadingValue {
    pub fn name(&self) -> &'static str {
        match self {
            ReadingValue::TemperatureC(_) => "temperature_c",
            ReadingValue::HumidityPct(_) => "humidity_pct",
            ReadingValue::DistanceCm(_) => "distance_cm",
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            ReadingValue::TemperatureC(v)
            | ReadingValue::HumidityPct(v)
            | ReadingValue::DistanceCm(v) => *v,
        }
    }
}

/// Why a trigger node fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerCause {
    Motion,
    Sound,
    BeamInterrupted,
}

impl TriggerCause {
    pub fn label(&self) -> &'static str {
        match self {
            TriggerCause::Motion => "motion",
            TriggerCause::Sound => "sound",
            TriggerCause::BeamInterrupted => "beam_interrupted",
        }
    }

    /// Cause implied by a trigger kind.
    pub fn for_kind(kind: SensorKind) -> Option<TriggerCause> {
        match kind {
            SensorKind::Pir => Some(TriggerCause::Motion),
            SensorKind::Sound => Some(TriggerCause::Sound),
            SensorKind::Photoelectric => Some(TriggerCause::BeamInterrupted),
            _ => None,
        }
    }
}

impl fmt::Display for TriggerCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A rising-edge detection from a trigger node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerEvent {
    pub node_id: u16,
    pub timestamp: u64,
    pub kind: SensorKind,
    pub cause: TriggerCause,
}

/// A rendered camera frame. `payload` is the raw image bytes and is the
/// only place visitor-identifying content ever lives; the hub purges it
/// right after classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageCapture {
    pub node_id: u16,
    pub timestamp: u64,
    pub payload: Vec<u8>,
    pub checksum: u32,
}

/// Anything a node can emit from a step.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    Reading(SensorReading),
    Trigger(TriggerEvent),
}

impl Emission {
    pub fn node_id(&self) -> u16 {
        match self {
            Emission::Reading(r) => r.node_id,
            Emission::Trigger(t) => t.node_id,
        }
    }

    pub fn timestamp(&self) -> u64 {
        match self {
            Emission::Reading(r) => r.timestamp,
            Emission::Trigger(t) => t.timestamp,
        }
    }

    pub fn kind(&self) -> SensorKind {
        match self {
            Emission::Reading(r) => r.kind,
            Emission::Trigger(t) => t.kind,
        }
    }
}

/// Ground truth at one instant of the scripted environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub time_s: u64,
    pub temperature_c: f64,
    pub humidity_pct: f64,
    pub visitor_present: bool,
    pub sound_level: f64,
    pub beam_blocked: bool,
    pub visitor_distance_cm: f64,
}

pub const ENV_CSV_HEADER: &[&str] = &[
    "time_s",
    "temperature_c",
    "humidity_pct",
    "visitor_present",
    "sound_level",
    "beam_blocked",
    "visitor_distance_cm",
];

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment script has no entries")]
    Empty,
    #[error("environment script times must be strictly increasing at entry {index}")]
    NonMonotonic { index: usize },
    #[error("environment entry {index}: {field} = {value} is out of range")]
    OutOfRange {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error("environment is undefined before t={start} (asked for t={t})")]
    BeforeStart { t: u64, start: u64 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("environment csv line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// Piecewise-constant environment over time. Sampling at `t` returns the
/// last entry at or before `t`; the final entry extends indefinitely.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentScript {
    entries: Vec<GroundTruth>,
}

impl EnvironmentScript {
    pub fn new(entries: Vec<GroundTruth>) -> Result<Self, EnvError> {
        if entries.is_empty() {
            return Err(EnvError::Empty);
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].time_s <= pair[0].time_s {
                return Err(EnvError::NonMonotonic { index: i + 1 });
            }
        }
        for (i, e) in entries.iter().enumerate() {
            let checks: [(&'static str, f64, f64, f64); 4] = [
                ("temperature_c", e.temperature_c, -40.0, 80.0),
                ("humidity_pct", e.humidity_pct, 0.0, 100.0),
                ("sound_level", e.sound_level, 0.0, 1.0),
                ("visitor_distance_cm", e.visitor_distance_cm, 0.0, 10_000.0),
            ];
            for (field, value, lo, hi) in checks {
                if !(lo..=hi).contains(&value) {
                    return Err(EnvError::OutOfRange {
                        index: i,
                        field,
                        value,
                    });
                }
            }
        }
        Ok(EnvironmentScript { entries })
    }

    pub fn from_csv_str(text: &str) -> Result<Self, EnvError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let csv_err = |line: u64, message: String| EnvError::Csv { line, message };

        let headers = reader
            .headers()
            .map_err(|e| csv_err(1, e.to_string()))?
            .clone();
        let got: Vec<&str> = headers.iter().collect();
        if got != ENV_CSV_HEADER {
            return Err(csv_err(
                1,
                format!(
                    "header must be `{}`, got `{}`",
                    ENV_CSV_HEADER.join(","),
                    got.join(",")
                ),
            ));
        }

        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(0, e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| -> Result<&str, EnvError> {
                record
                    .get(i)
                    .ok_or_else(|| csv_err(line, format!("missing column {}", ENV_CSV_HEADER[i])))
            };
            let float = |i: usize| -> Result<f64, EnvError> {
                let raw = field(i)?;
                raw.parse().map_err(|_| {
                    csv_err(line, format!("{}: `{}` is not a number", ENV_CSV_HEADER[i], raw))
                })
            };
            let flag = |i: usize| -> Result<bool, EnvError> {
                match field(i)? {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    raw => Err(csv_err(
                        line,
                        format!("{}: `{}` must be 0 or 1", ENV_CSV_HEADER[i], raw),
                    )),
                }
            };
            let time_s: u64 = {
                let raw = field(0)?;
                raw.parse()
                    .map_err(|_| csv_err(line, format!("time_s: `{raw}` is not an integer")))?
            };
            entries.push(GroundTruth {
                time_s,
                temperature_c: float(1)?,
                humidity_pct: float(2)?,
                visitor_present: flag(3)?,
                sound_level: float(4)?,
                beam_blocked: flag(5)?,
                visitor_distance_cm: float(6)?,
            });
        }
        EnvironmentScript::new(entries)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&ENV_CSV_HEADER.join(","));
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.time_s,
                e.temperature_c,
                e.humidity_pct,
                e.visitor_present as u8,
                e.sound_level,
                e.beam_blocked as u8,
                e.visitor_distance_cm,
            ));
        }
        out
    }

    pub fn entries(&self) -> &[GroundTruth] {
        &self.entries
    }

    pub fn start_time(&self) -> u64 {
        self.entries[0].time_s
    }

    pub fn end_time(&self) -> u64 {
        self.entries[self.entries.len() - 1].time_s
    }

    /// Ground truth in effect at `t`.
    pub fn sample(&self, t: u64) -> Result<&GroundTruth, EnvError> {
        let idx = self.entries.partition_point(|e| e.time_s <= t);
        if idx == 0 {
            return Err(EnvError::BeforeStart {
                t,
                start: self.start_time(),
            });
        }
        Ok(&self.entries[idx - 1])
    }

    /// Entries with `after < time_s <= upto`, in order.
    pub fn entries_in(&self, after: u64, upto: u64) -> &[GroundTruth] {
        let lo = self.entries.partition_point(|e| e.time_s <= after);
        let hi = self.entries.partition_point(|e| e.time_s <= upto);
        &self.entries[lo..hi]
    }
}

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("node {id:#06x} is a {kind} sensor, not a camera")]
    NotACamera { id: u16, kind: SensorKind },
    #[error("periodic node {id:#06x} has no cadence")]
    MissingCadence { id: u16 },
    #[error(transparent)]
    Environment(#[from] EnvError),
}

/// Per-node stepping state. Create one per node at run start and feed it
/// to every subsequent [`step_node`] call for that node.
#[derive(Debug, Clone)]
pub struct NodeState {
    last_step: u64,
    /// Predicate level after the last processed environment entry.
    level: bool,
    refractory_until: u64,
}

impl NodeState {
    /// State for a node joining at `start`. Trigger nodes latch the
    /// predicate level already in effect, so a stimulus that is active
    /// when the node joins does not count as an edge.
    pub fn new(spec: &NodeSpec, env: &EnvironmentScript, start: u64) -> Result<Self, NodeError> {
        let level = if spec.kind.is_trigger() {
            trigger_level(spec, env.sample(start)?)
        } else {
            false
        };
        Ok(NodeState {
            last_step: start,
            level,
            refractory_until: 0,
        })
    }
}

fn trigger_level(spec: &NodeSpec, gt: &GroundTruth) -> bool {
    match spec.kind {
        SensorKind::Pir => gt.visitor_present,
        SensorKind::Photoelectric => gt.beam_blocked,
        SensorKind::Sound => gt.sound_level > spec.effective_sound_threshold(),
        _ => false,
    }
}

fn quantize2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Advance a node from its last step time to `now`, emitting everything
/// it produced in between. Events carry the simulated instant they
/// occurred at, not `now`. Stepping is idempotent over empty intervals.
pub fn step_node(
    spec: &NodeSpec,
    state: &mut NodeState,
    now: u64,
    env: &EnvironmentScript,
) -> Result<Vec<Emission>, NodeError> {
    let mut out = Vec::new();
    if now <= state.last_step {
        return Ok(out);
    }

    if spec.kind.is_periodic() {
        let cadence = spec
            .cadence_s
            .ok_or(NodeError::MissingCadence { id: spec.id })?;
        let mut k = state.last_step / cadence + 1;
        while k * cadence <= now {
            let t = k * cadence;
            let gt = env.sample(t)?;
            match spec.kind {
                SensorKind::TemperatureHumidity => {
                    let temp = quantize2(gt.temperature_c.clamp(-40.0, 80.0));
                    let hum = quantize2(gt.humidity_pct.clamp(0.0, 100.0));
                    out.push(Emission::Reading(SensorReading {
                        node_id: spec.id,
                        timestamp: t,
                        kind: spec.kind,
                        value: ReadingValue::TemperatureC(temp),
                    }));
                    out.push(Emission::Reading(SensorReading {
                        node_id: spec.id,
                        timestamp: t,
                        kind: spec.kind,
                        value: ReadingValue::HumidityPct(hum),
                    }));
                }
                SensorKind::Ultrasonic => {
                    let cm = gt.visitor_distance_cm.round().clamp(2.0, 400.0);
                    out.push(Emission::Reading(SensorReading {
                        node_id: spec.id,
                        timestamp: t,
                        kind: spec.kind,
                        value: ReadingValue::DistanceCm(cm),
                    }));
                }
                _ => unreachable!("periodic kinds are dht22 and ultrasonic"),
            }
            k += 1;
        }
    } else if spec.kind.is_trigger() {
        let cause = TriggerCause::for_kind(spec.kind).expect("trigger kind has a cause");
        for gt in env.entries_in(state.last_step, now) {
            let level = trigger_level(spec, gt);
            // Edges inside the refractory window are swallowed, not latched.
            if level && !state.level && gt.time_s >= state.refractory_until {
                out.push(Emission::Trigger(TriggerEvent {
                    node_id: spec.id,
                    timestamp: gt.time_s,
                    kind: spec.kind,
                    cause,
                }));
                state.refractory_until = gt.time_s + spec.effective_debounce_s();
            }
            state.level = level;
        }
    }

    state.last_step = now;
    Ok(out)
}

/// Battery charge consumed by a node over a window, in mAh.
pub fn power_consumed(spec: &NodeSpec, window: (u64, u64), activity: &ActivityLog) -> f64 {
    let (start, end) = window;
    assert!(end >= start, "power window must not be inverted");
    let total_h = (end - start) as f64 / 3600.0;
    match spec.kind {
        SensorKind::Camera => {
            let active_h = activity.active_seconds(spec.id, window) as f64 / 3600.0;
            let idle_h = total_h - active_h;
            idle_h * spec.power.idle_mah_per_h + active_h * spec.power.active_mah_per_h
        }
        _ => total_h * spec.power.active_mah_per_h,
    }
}

/// Which nodes were busy when. Only cameras report activity today; the
/// flat-draw kinds never record spans.
#[derive(Debug, Clone, Default)]
pub struct ActivityLog {
    spans: std::collections::BTreeMap<u16, Vec<(u64, u64)>>,
}

impl ActivityLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, node_id: u16, start: u64, end: u64) {
        assert!(end >= start, "activity span must not be inverted");
        self.spans.entry(node_id).or_default().push((start, end));
    }

    /// Seconds of the window covered by at least one span for the node.
    pub fn active_seconds(&self, node_id: u16, window: (u64, u64)) -> u64 {
        let Some(spans) = self.spans.get(&node_id) else {
            return 0;
        };
        let mut clipped: Vec<(u64, u64)> = spans
            .iter()
            .map(|&(s, e)| (s.max(window.0), e.min(window.1)))
            .filter(|&(s, e)| s < e)
            .collect();
        clipped.sort_unstable();
        let mut total = 0;
        let mut cursor = 0u64;
        for (s, e) in clipped {
            let s = s.max(cursor);
            if e > s {
                total += e - s;
                cursor = e;
            }
            cursor = cursor.max(e);
        }
        total
    }
}

/// Render a synthetic frame on a camera node. The payload embeds the
/// behaviour class the scripted scene depicts; see [`synth`] for the
/// format.
pub fn capture_image(
    spec: &NodeSpec,
    env: &EnvironmentScript,
    now: u64,
) -> Result<ImageCapture, NodeError> {
    if spec.kind != SensorKind::Camera {
        return Err(NodeError::NotACamera {
            id: spec.id,
            kind: spec.kind,
        });
    }
    let gt = env.sample(now)?;
    let class_id = synth::scene_class(gt);
    let payload = synth::generate(spec.id, now, synth::SCHEME_BINARY, class_id);
    let checksum = crc32(&payload);
    Ok(ImageCapture {
        node_id: spec.id,
        timestamp: now,
        payload,
        checksum,
    })
}

/// Synthetic image format.
///
/// Frames are not pixels: they are byte streams with a small header and a
/// pseudorandom body whose byte values live in a per-class band. Bands
/// are disjoint, which keeps any two classes linearly separable on byte
/// histograms while still looking like opaque sensor data to the rest of
/// the pipeline.
pub mod synth {
    use super::GroundTruth;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const MAGIC: [u8; 4] = *b"SIMG";
    pub const FORMAT_VERSION: u8 = 1;
    pub const HEADER_LEN: usize = 8;
    pub const BODY_LEN: usize = 256;

    pub const SCHEME_BINARY: u8 = 0;
    pub const SCHEME_MULTIMODAL: u8 = 1;

    pub const MAX_CLASSES: u8 = 4;

    /// Half-open byte band `[lo, hi)` for a class body.
    pub fn class_band(class_id: u8) -> (u8, u8) {
        assert!(class_id < MAX_CLASSES, "class id out of range");
        let lo = 16 + 56 * class_id;
        (lo, lo + 40)
    }

    /// Binary class depicted by a scripted scene: risky when the barrier
    /// beam is broken or a visitor is closer than 50 cm.
    pub fn scene_class(gt: &GroundTruth) -> u8 {
        let risky = gt.beam_blocked || (gt.visitor_present && gt.visitor_distance_cm < 50.0);
        risky as u8
    }

    pub fn generate(node_id: u16, timestamp: u64, scheme: u8, class_id: u8) -> Vec<u8> {
        let (lo, hi) = class_band(class_id);
        let mut payload = Vec::with_capacity(HEADER_LEN + BODY_LEN);
        payload.extend_from_slice(&MAGIC);
        payload.push(FORMAT_VERSION);
        payload.push(scheme);
        payload.push(class_id);
        payload.push(0);

        let seed = (node_id as u64) << 48
            ^ (scheme as u64) << 40
            ^ (class_id as u64) << 32
            ^ timestamp;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        payload.extend((0..BODY_LEN).map(|_| rng.random_range(lo..hi)));
        payload
    }

    /// Parse `(scheme, class_id)` out of a payload header, if it is one
    /// of ours.
    pub fn header(payload: &[u8]) -> Option<(u8, u8)> {
        if payload.len() < HEADER_LEN
            || payload[..4] != MAGIC
            || payload[4] != FORMAT_VERSION
        {
            return None;
        }
        Some((payload[5], payload[6]))
    }
}
