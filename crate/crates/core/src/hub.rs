//! Edge hub: ingests deliveries from the sensor nodes, keeps the
//! append-only event ledger, dispatches capture commands to the nearest
//! camera, classifies and purges images, and ships batch uploads to the
//! cloud tier with bounded retries.
//!
//! The ledger is the system of record. Every observable thing the hub
//! does lands in it as one JSON line with a gap-free sequence number and
//! a non-decreasing timestamp, which is what makes whole runs byte-for-
//! byte reproducible.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::crc32;
use crate::cloud::{BlobStore, CloudError, ParseStats, RecordStore, BATCH_CSV_HEADER};
use crate::config::{
    apply_change_set, validate_config, ChangeSet, ConfigError, HubSettings, NodeSpec, WsnConfig,
};
use crate::nodes::{Emission, ImageCapture, SensorKind};
use crate::vision::Classifier;

#[derive(Debug, Error)]
pub enum HubError {
    #[error("ledger i/o failure: {0}")]
    LedgerIo(#[from] io::Error),
    #[error("ledger timestamps must not regress: last {last}, got {got}")]
    TimeRegression { last: u64, got: u64 },
    #[error("ledger line {line} is corrupt: {message}")]
    CorruptLedger { line: usize, message: String },
    #[error("image from {id:#06x} failed its checksum")]
    ChecksumMismatch { id: u16 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Ledger entry categories.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    RoutineCheck,
    Trigger,
    SensorReading,
    NetworkRequest,
    ImageCapture,
    System,
}

impl Category {
    pub fn all() -> [Category; 6] {
        [
            Category::RoutineCheck,
            Category::Trigger,
            Category::SensorReading,
            Category::NetworkRequest,
            Category::ImageCapture,
            Category::System,
        ]
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::RoutineCheck => "routine_check",
            Category::Trigger => "trigger",
            Category::SensorReading => "sensor_reading",
            Category::NetworkRequest => "network_request",
            Category::ImageCapture => "image_capture",
            Category::System => "system",
        }
    }
}

impl std::fmt::Display for Category {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Category-specific payload of a ledger entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntryDetail {
    Reading {
        kind: String,
        value_name: String,
        value: f64,
        emitted_at: u64,
        rssi_dbm: i16,
    },
    Trigger {
        kind: String,
        cause: String,
        emitted_at: u64,
        rssi_dbm: i16,
    },
    Image {
        image_id: String,
        label: String,
        confidence: f64,
        byte_count: u64,
        captured_at: u64,
    },
    Routine {
        note: String,
    },
    Network {
        batch_id: u64,
        attempt: u32,
        outcome: String,
        blob: Option<String>,
    },
    System {
        note: String,
    },
}

/// One line of the event ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub seq: u64,
    pub timestamp: u64,
    pub category: Category,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_id: Option<u16>,
    pub detail: EntryDetail,
}

/// Entry tallies by category.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize,
)]
pub struct CategoryCounts {
    pub routine_check: u64,
    pub trigger: u64,
    pub sensor_reading: u64,
    pub network_request: u64,
    pub image_capture: u64,
    pub system: u64,
}

impl CategoryCounts {
    pub fn get(&self, category: Category) -> u64 {
        match category {
            Category::RoutineCheck => self.routine_check,
            Category::Trigger => self.trigger,
            Category::SensorReading => self.sensor_reading,
            Category::NetworkRequest => self.network_request,
            Category::ImageCapture => self.image_capture,
            Category::System => self.system,
        }
    }

    fn bump(&mut self, category: Category) {
        match category {
            Category::RoutineCheck => self.routine_check += 1,
            Category::Trigger => self.trigger += 1,
            Category::SensorReading => self.sensor_reading += 1,
            Category::NetworkRequest => self.network_request += 1,
            Category::ImageCapture => self.image_capture += 1,
            Category::System => self.system += 1,
        }
    }

    pub fn total(&self) -> u64 {
        Category::all().iter().map(|&c| self.get(c)).sum()
    }

    pub fn tally(entries: &[LedgerEntry]) -> CategoryCounts {
        let mut counts = CategoryCounts::default();
        for entry in entries {
            counts.bump(entry.category);
        }
        counts
    }
}

/// Append-only event log: gap-free 0-based sequence numbers, timestamps
/// never regress, one JSON object per line when backed by a file.
#[derive(Debug)]
pub struct EventLedger {
    entries: Vec<LedgerEntry>,
    counts: CategoryCounts,
    sink: Option<BufWriter<std::fs::File>>,
}

impl EventLedger {
    pub fn in_memory() -> Self {
        EventLedger {
            entries: Vec::new(),
            counts: CategoryCounts::default(),
            sink: None,
        }
    }

    /// Start a fresh ledger that mirrors every entry to `path`.
    pub fn with_file(path: &Path) -> Result<Self, HubError> {
        let file = std::fs::File::create(path)?;
        Ok(EventLedger {
            entries: Vec::new(),
            counts: CategoryCounts::default(),
            sink: Some(BufWriter::new(file)),
        })
    }

    pub fn append(
        &mut self,
        timestamp: u64,
        category: Category,
        node_id: Option<u16>,
        detail: EntryDetail,
    ) -> Result<&LedgerEntry, HubError> {
        if let Some(last) = self.entries.last() {
            if timestamp < last.timestamp {
                return Err(HubError::TimeRegression {
                    last: last.timestamp,
                    got: timestamp,
                });
            }
        }
        let entry = LedgerEntry {
            seq: self.entries.len() as u64,
            timestamp,
            category,
            node_id,
            detail,
        };
        if let Some(sink) = &mut self.sink {
            let line = serde_json::to_string(&entry).expect("ledger entry serializes");
            writeln!(sink, "{line}")?;
        }
        self.counts.bump(category);
        self.entries.push(entry);
        Ok(self.entries.last().expect("just pushed"))
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn counts(&self) -> CategoryCounts {
        self.counts
    }

    pub fn flush(&mut self) -> Result<(), HubError> {
        if let Some(sink) = &mut self.sink {
            sink.flush()?;
        }
        Ok(())
    }

    /// Read a ledger file back, verifying sequence and time invariants.
    pub fn load(path: &Path) -> Result<Vec<LedgerEntry>, HubError> {
        let text = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        let mut last_timestamp = 0u64;
        for (i, line) in text.lines().enumerate() {
            let entry: LedgerEntry =
                serde_json::from_str(line).map_err(|e| HubError::CorruptLedger {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if entry.seq != i as u64 {
                return Err(HubError::CorruptLedger {
                    line: i + 1,
                    message: format!("expected seq {i}, got {}", entry.seq),
                });
            }
            if entry.timestamp < last_timestamp {
                return Err(HubError::CorruptLedger {
                    line: i + 1,
                    message: format!(
                        "timestamp {} regresses below {last_timestamp}",
                        entry.timestamp
                    ),
                });
            }
            last_timestamp = entry.timestamp;
            entries.push(entry);
        }
        Ok(entries)
    }
}

/// Instruction to a camera node, issued in response to a trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureCommand {
    pub camera_id: u16,
    pub requested_by: u16,
    pub issued_at: u64,
}

/// Something arriving at the hub over a radio channel.
#[derive(Debug, Clone)]
pub enum Delivery {
    Ble { emission: Emission, rssi_dbm: i16 },
    Image(ImageCapture),
}

/// What one ingest call produced.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub seq: Option<u64>,
    pub capture: Option<CaptureCommand>,
}

/// Behaviour verdict for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedImage {
    pub label: String,
    pub confidence: f64,
}

/// Classify an image and purge its pixel data, in that order, before
/// anything else can observe the payload. The purge is unconditional: a
/// classifier failure yields the label `unknown` and the bytes still go.
pub fn classify_and_purge(
    image: &mut ImageCapture,
    classifier: &dyn Classifier,
) -> ClassifiedImage {
    let verdict = classifier.predict(&image.payload);
    for byte in image.payload.iter_mut() {
        *byte = 0;
    }
    image.payload = Vec::new();
    match verdict {
        Ok((label, confidence)) => ClassifiedImage {
            label: label.name().to_string(),
            confidence,
        },
        Err(_) => ClassifiedImage {
            label: "unknown".to_string(),
            confidence: 0.0,
        },
    }
}

/// A compiled batch waiting for upload.
#[derive(Debug, Clone)]
pub struct UploadBatch {
    pub batch_id: u64,
    pub window: (u64, u64),
    pub csv: Vec<u8>,
    pub row_count: u64,
}

/// Terminal fate of one queued batch after `flush_uploads`.
#[derive(Debug)]
pub enum UploadResult {
    Uploaded {
        batch_id: u64,
        attempts: u32,
        blob: String,
        parse: ParseStats,
    },
    DeadLettered {
        batch_id: u64,
        attempts: u32,
        path: PathBuf,
    },
}

/// Most recent value seen from a node, for the status endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastReading {
    pub timestamp: u64,
    pub kind: String,
    pub value_name: String,
    pub value: f64,
}

/// Snapshot served over the status endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub uptime_s: u64,
    pub config_version: u64,
    pub classifier: String,
    pub node_count: usize,
    pub upload_queue_depth: usize,
    pub counts: CategoryCounts,
    pub last_readings: BTreeMap<u16, LastReading>,
}

pub struct Hub {
    settings: HubSettings,
    config_version: u64,
    nodes: BTreeMap<u16, NodeSpec>,
    ledger: EventLedger,
    classifier: Box<dyn Classifier>,
    upload_queue: VecDeque<UploadBatch>,
    next_batch_id: u64,
    last_readings: BTreeMap<u16, LastReading>,
    dead_letter_dir: Option<PathBuf>,
    started_at: u64,
}

impl Hub {
    pub fn new(
        config: &WsnConfig,
        classifier: Box<dyn Classifier>,
        ledger: EventLedger,
        started_at: u64,
    ) -> Hub {
        let nodes = config.nodes.iter().map(|n| (n.id, n.clone())).collect();
        Hub {
            settings: config.hub.clone(),
            config_version: config.version,
            nodes,
            ledger,
            classifier,
            upload_queue: VecDeque::new(),
            next_batch_id: 1,
            last_readings: BTreeMap::new(),
            dead_letter_dir: None,
            started_at,
        }
    }

    /// Where batches that exhaust their retries get written.
    pub fn set_dead_letter_dir(&mut self, dir: PathBuf) {
        self.dead_letter_dir = Some(dir);
    }

    pub fn settings(&self) -> &HubSettings {
        &self.settings
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.values()
    }

    pub fn node(&self, id: u16) -> Option<&NodeSpec> {
        self.nodes.get(&id)
    }

    pub fn ledger(&self) -> &EventLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut EventLedger {
        &mut self.ledger
    }

    /// Accept one delivery. Readings and triggers come in over BLE,
    /// images over wifi; a trigger may yield a capture command for the
    /// nearest camera.
    pub fn ingest(&mut self, delivery: Delivery, now: u64) -> Result<IngestOutcome, HubError> {
        match delivery {
            Delivery::Ble { emission, rssi_dbm } => self.ingest_ble(emission, rssi_dbm, now),
            Delivery::Image(image) => self.ingest_image(image, now),
        }
    }

    fn ingest_ble(
        &mut self,
        emission: Emission,
        rssi_dbm: i16,
        now: u64,
    ) -> Result<IngestOutcome, HubError> {
        let node_id = emission.node_id();
        if !self.nodes.contains_key(&node_id) {
            // A node can be dropped from the registry while its last
            // advertisement is still in flight; shed it with a trace.
            self.ledger.append(
                now,
                Category::System,
                None,
                EntryDetail::System {
                    note: format!("dropped advertisement from unknown node {node_id:#06x}"),
                },
            )?;
            return Ok(IngestOutcome {
                seq: None,
                capture: None,
            });
        }

        match emission {
            Emission::Reading(reading) => {
                let entry = self.ledger.append(
                    now,
                    Category::SensorReading,
                    Some(node_id),
                    EntryDetail::Reading {
                        kind: reading.kind.label().to_string(),
                        value_name: reading.value.name().to_string(),
                        value: reading.value.value(),
                        emitted_at: reading.timestamp,
                        rssi_dbm,
                    },
                )?;
                let seq = entry.seq;
                self.last_readings.insert(
                    node_id,
                    LastReading {
                        timestamp: now,
                        kind: reading.kind.label().to_string(),
                        value_name: reading.value.name().to_string(),
                        value: reading.value.value(),
                    },
                );
                Ok(IngestOutcome {
                    seq: Some(seq),
                    capture: None,
                })
            }
            Emission::Trigger(trigger) => {
                let seq = self
                    .ledger
                    .append(
                        now,
                        Category::Trigger,
                        Some(node_id),
                        EntryDetail::Trigger {
                            kind: trigger.kind.label().to_string(),
                            cause: trigger.cause.label().to_string(),
                            emitted_at: trigger.timestamp,
                            rssi_dbm,
                        },
                    )?
                    .seq;
                let capture = self.dispatch_capture(node_id, now)?;
                Ok(IngestOutcome {
                    seq: Some(seq),
                    capture,
                })
            }
        }
    }

    /// Pick the camera closest (along the gallery wall) to the node
    /// that raised the trigger; ties go to the lowest id.
    fn dispatch_capture(
        &mut self,
        trigger_node: u16,
        now: u64,
    ) -> Result<Option<CaptureCommand>, HubError> {
        let trigger_distance = self
            .nodes
            .get(&trigger_node)
            .map(|n| n.distance_m)
            .unwrap_or(0.0);
        let camera = self
            .nodes
            .values()
            .filter(|n| n.kind == SensorKind::Camera)
            .min_by(|a, b| {
                let da = (a.distance_m - trigger_distance).abs();
                let db = (b.distance_m - trigger_distance).abs();
                da.partial_cmp(&db)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.id.cmp(&b.id))
            })
            .map(|n| n.id);
        match camera {
            Some(camera_id) => Ok(Some(CaptureCommand {
                camera_id,
                requested_by: trigger_node,
                issued_at: now,
            })),
            None => {
                self.ledger.append(
                    now,
                    Category::System,
                    Some(trigger_node),
                    EntryDetail::System {
                        note: format!(
                            "no camera available for capture requested by {trigger_node:#06x}"
                        ),
                    },
                )?;
                Ok(None)
            }
        }
    }

    fn ingest_image(&mut self, mut image: ImageCapture, now: u64) -> Result<IngestOutcome, HubError> {
        if crc32(&image.payload) != image.checksum {
            return Err(HubError::ChecksumMismatch { id: image.node_id });
        }
        let byte_count = image.payload.len() as u64;
        let verdict = classify_and_purge(&mut image, self.classifier.as_ref());
        debug_assert!(image.payload.is_empty());
        let image_id = format!("img-{:04x}-{}", image.node_id, image.timestamp);
        let seq = self
            .ledger
            .append(
                now,
                Category::ImageCapture,
                Some(image.node_id),
                EntryDetail::Image {
                    image_id,
                    label: verdict.label,
                    confidence: verdict.confidence,
                    byte_count,
                    captured_at: image.timestamp,
                },
            )?
            .seq;
        Ok(IngestOutcome {
            seq: Some(seq),
            capture: None,
        })
    }

    /// Log one liveness poll of a node.
    pub fn routine_check(&mut self, node_id: u16, now: u64) -> Result<u64, HubError> {
        let note = match self.nodes.get(&node_id) {
            Some(spec) => format!("poll ok ({})", spec.kind.label()),
            None => "poll skipped (node not registered)".to_string(),
        };
        Ok(self
            .ledger
            .append(
                now,
                Category::RoutineCheck,
                Some(node_id),
                EntryDetail::Routine { note },
            )?
            .seq)
    }

    pub fn heartbeat(&mut self, now: u64) -> Result<u64, HubError> {
        Ok(self
            .ledger
            .append(
                now,
                Category::System,
                None,
                EntryDetail::System {
                    note: "heartbeat ok".to_string(),
                },
            )?
            .seq)
    }

    /// Record a free-form operational note, e.g. a failed wifi transfer.
    pub fn system_note(
        &mut self,
        now: u64,
        node_id: Option<u16>,
        note: impl Into<String>,
    ) -> Result<u64, HubError> {
        Ok(self
            .ledger
            .append(
                now,
                Category::System,
                node_id,
                EntryDetail::System { note: note.into() },
            )?
            .seq)
    }

    pub fn housekeeping(&mut self, now: u64) -> Result<u64, HubError> {
        Ok(self
            .ledger
            .append(
                now,
                Category::System,
                None,
                EntryDetail::System {
                    note: "housekeeping sweep".to_string(),
                },
            )?
            .seq)
    }

    /// Compile the field data logged in `[window.0, window.1)` into an
    /// upload batch and queue it. Every window produces a batch, empty
    /// or not, so upload cadence is independent of visitor traffic.
    pub fn compile_batch(&mut self, window: (u64, u64)) -> u64 {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(BATCH_CSV_HEADER)
            .expect("vec writer cannot fail");
        let mut row_count = 0u64;
        for entry in &self.entries_in_window(window) {
            let (kind, value_name, value, label, confidence) = match &entry.detail {
                EntryDetail::Reading {
                    kind,
                    value_name,
                    value,
                    ..
                } => (
                    kind.clone(),
                    value_name.clone(),
                    value.to_string(),
                    String::new(),
                    String::new(),
                ),
                EntryDetail::Trigger { kind, cause, .. } => (
                    kind.clone(),
                    "cause".to_string(),
                    cause.clone(),
                    String::new(),
                    String::new(),
                ),
                EntryDetail::Image {
                    image_id,
                    label,
                    confidence,
                    ..
                } => (
                    "camera".to_string(),
                    "image_id".to_string(),
                    image_id.clone(),
                    label.clone(),
                    confidence.to_string(),
                ),
                _ => continue,
            };
            writer
                .write_record([
                    entry.seq.to_string(),
                    entry.timestamp.to_string(),
                    entry.category.label().to_string(),
                    entry.node_id.map(|id| id.to_string()).unwrap_or_default(),
                    kind,
                    value_name,
                    value,
                    label,
                    confidence,
                ])
                .expect("vec writer cannot fail");
            row_count += 1;
        }
        let csv = writer.into_inner().expect("vec writer cannot fail");
        let batch_id = self.next_batch_id;
        self.next_batch_id += 1;
        self.upload_queue.push_back(UploadBatch {
            batch_id,
            window,
            csv,
            row_count,
        });
        batch_id
    }

    fn entries_in_window(&self, window: (u64, u64)) -> Vec<LedgerEntry> {
        self.ledger
            .entries()
            .iter()
            .filter(|e| {
                e.timestamp >= window.0
                    && e.timestamp < window.1
                    && matches!(
                        e.category,
                        Category::SensorReading | Category::Trigger | Category::ImageCapture
                    )
            })
            .cloned()
            .collect()
    }

    pub fn upload_queue_depth(&self) -> usize {
        self.upload_queue.len()
    }

    /// Push every queued batch to blob storage and parse it into the
    /// record store. Each attempt is logged; a batch that exhausts
    /// `upload_retry_limit` retries is written to the dead-letter
    /// directory and the pipeline moves on.
    pub fn flush_uploads(
        &mut self,
        blobs: &mut BlobStore,
        records: &mut RecordStore,
        now: u64,
    ) -> Result<Vec<UploadResult>, HubError> {
        let max_attempts = self.settings.upload_retry_limit + 1;
        let mut results = Vec::new();
        while let Some(batch) = self.upload_queue.pop_front() {
            let blob_name = format!("batch_{:06}", batch.batch_id);
            let mut attempt = 0u32;
            loop {
                attempt += 1;
                match blobs.put_blob("batches", &blob_name, &batch.csv, now) {
                    Ok(receipt) => {
                        let locator = receipt.locator();
                        self.ledger.append(
                            now,
                            Category::NetworkRequest,
                            None,
                            EntryDetail::Network {
                                batch_id: batch.batch_id,
                                attempt,
                                outcome: "success".to_string(),
                                blob: Some(locator.clone()),
                            },
                        )?;
                        let parse =
                            records.parse_blob(blobs, "batches", &blob_name, Some(receipt.version))?;
                        results.push(UploadResult::Uploaded {
                            batch_id: batch.batch_id,
                            attempts: attempt,
                            blob: locator,
                            parse,
                        });
                        break;
                    }
                    Err(error) => {
                        self.ledger.append(
                            now,
                            Category::NetworkRequest,
                            None,
                            EntryDetail::Network {
                                batch_id: batch.batch_id,
                                attempt,
                                outcome: format!("failure: {error}"),
                                blob: None,
                            },
                        )?;
                        if attempt >= max_attempts {
                            let path = self.dead_letter(&batch)?;
                            self.ledger.append(
                                now,
                                Category::System,
                                None,
                                EntryDetail::System {
                                    note: format!(
                                        "batch {} dead-lettered after {attempt} attempts",
                                        batch.batch_id
                                    ),
                                },
                            )?;
                            results.push(UploadResult::DeadLettered {
                                batch_id: batch.batch_id,
                                attempts: attempt,
                                path,
                            });
                            break;
                        }
                    }
                }
            }
        }
        Ok(results)
    }

    fn dead_letter(&self, batch: &UploadBatch) -> Result<PathBuf, HubError> {
        let dir = self
            .dead_letter_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("dead_letter"));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("dead_{}.csv", batch.batch_id));
        std::fs::write(&path, &batch.csv)?;
        Ok(path)
    }

    /// Apply a validated configuration change to the live registry.
    /// The whole change set is checked first; a bad change leaves the
    /// registry untouched.
    pub fn apply_config_change(&mut self, change: &ChangeSet, now: u64) -> Result<(), HubError> {
        let current = validate_config(WsnConfig {
            version: self.config_version,
            hub: self.settings.clone(),
            nodes: self.nodes.values().cloned().collect(),
        })?;
        let updated = apply_change_set(&current, change)?;
        self.config_version = updated.version;
        self.settings = updated.hub.clone();
        self.nodes = updated.nodes.iter().map(|n| (n.id, n.clone())).collect();
        self.ledger.append(
            now,
            Category::System,
            None,
            EntryDetail::System {
                note: format!(
                    "config v{} applied: +{} -{} ~{}",
                    self.config_version,
                    change.added.len(),
                    change.removed.len(),
                    change.modified.len()
                ),
            },
        )?;
        Ok(())
    }

    pub fn status_snapshot(&self, now: u64) -> StatusReport {
        StatusReport {
            uptime_s: now.saturating_sub(self.started_at),
            config_version: self.config_version,
            classifier: self.classifier.name().to_string(),
            node_count: self.nodes.len(),
            upload_queue_depth: self.upload_queue.len(),
            counts: self.ledger.counts(),
            last_readings: self.last_readings.clone(),
        }
    }
}
