//! File-backed emulation of the cloud tier: a versioned blob store with
//! a receipt manifest, a table store fed by parsing uploaded batches,
//! and a metered cost model.
//!
//! Everything lives under one root directory so a run's cloud state can
//! be inspected, copied, or diffed like any other artifact:
//!
//! ```text
//! cloud_store/<container>/<name>.v<version>   blob payloads
//! cloud_store/manifest.jsonl                  one receipt per upload
//! record_store/readings.csv                   parsed sensor values
//! record_store/events.csv                     parsed trigger events
//! record_store/image_labels.csv               parsed behaviour labels
//! record_store/quarantine.csv                 rows that failed to parse
//! record_store/parsed.txt                     blob versions already parsed
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::crc32;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("cloud i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid {what} name `{name}`: use lowercase letters, digits, `_`, `-`, `.`")]
    BadName { what: &'static str, name: String },
    #[error("blob {container}/{name} not found")]
    BlobNotFound { container: String, name: String },
    #[error("blob {container}/{name} has no version {version}")]
    VersionNotFound {
        container: String,
        name: String,
        version: u32,
    },
    #[error("injected storage fault (attempt {attempt})")]
    InjectedFault { attempt: u32 },
    #[error("batch {key} has a malformed header: {message}")]
    BatchHeader { key: String, message: String },
    #[error("unknown table `{0}`; known tables: readings, events, image_labels, quarantine")]
    UnknownTable(String),
    #[error("table `{table}` has no field `{field}`")]
    UnknownField { table: String, field: String },
    #[error("manifest line {line} is corrupt: {message}")]
    Manifest { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CloudError + '_ {
    move |source| CloudError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_name(what: &'static str, name: &str) -> Result<(), CloudError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || "_-.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(CloudError::BadName {
            what,
            name: name.to_string(),
        })
    }
}

/// Durable proof of one blob upload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobReceipt {
    pub container: String,
    pub name: String,
    pub version: u32,
    pub byte_count: u64,
    pub checksum: u32,
    pub uploaded_at: u64,
}

impl BlobReceipt {
    /// `container/name.vN`, the canonical way to cite a stored blob.
    pub fn locator(&self) -> String {
        format!("{}/{}.v{}", self.container, self.name, self.version)
    }
}

/// Append-only blob storage. Re-putting a name writes the next version;
/// nothing is ever overwritten, so a receipt stays valid forever.
#[derive(Debug)]
pub struct BlobStore {
    dir: PathBuf,
    versions: BTreeMap<(String, String), u32>,
    receipts: Vec<BlobReceipt>,
    /// Fault drill: fail this many leading put attempts per blob name.
    fail_first: u32,
    attempts: BTreeMap<(String, String), u32>,
}

impl BlobStore {
    /// Open (or create) the blob store under `root/cloud_store`.
    pub fn open(root: &Path) -> Result<Self, CloudError> {
        let dir = root.join("cloud_store");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest = dir.join("manifest.jsonl");
        let mut receipts = Vec::new();
        let mut versions = BTreeMap::new();
        if manifest.exists() {
            let text = std::fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
            for (i, line) in text.lines().enumerate() {
                let receipt: BlobReceipt =
                    serde_json::from_str(line).map_err(|e| CloudError::Manifest {
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                let key = (receipt.container.clone(), receipt.name.clone());
                let slot = versions.entry(key).or_insert(0);
                *slot = (*slot).max(receipt.version);
                receipts.push(receipt);
            }
        }
        Ok(BlobStore {
            dir,
            versions,
            receipts,
            fail_first: 0,
            attempts: BTreeMap::new(),
        })
    }

    /// Make the first `count` put attempts of every distinct blob name
    /// fail with an injected fault. Used by upload-retry drills.
    pub fn inject_put_failures(&mut self, count: u32) {
        self.fail_first = count;
        self.attempts.clear();
    }

    pub fn put_blob(
        &mut self,
        container: &str,
        name: &str,
        bytes: &[u8],
        now: u64,
    ) -> Result<BlobReceipt, CloudError> {
        check_name("container", container)?;
        check_name("blob", name)?;

        let key = (container.to_string(), name.to_string());
        let attempt = self.attempts.entry(key.clone()).or_insert(0);
        *attempt += 1;
        if *attempt <= self.fail_first {
            // Fail before touching any state; a failed put leaves no trace.
            return Err(CloudError::InjectedFault { attempt: *attempt });
        }

        let version = self.versions.get(&key).copied().unwrap_or(0) + 1;
        let container_dir = self.dir.join(container);
        std::fs::create_dir_all(&container_dir).map_err(io_err(&container_dir))?;
        let path = container_dir.join(format!("{name}.v{version}"));
        std::fs::write(&path, bytes).map_err(io_err(&path))?;

        let receipt = BlobReceipt {
            container: container.to_string(),
            name: name.to_string(),
            version,
            byte_count: bytes.len() as u64,
            checksum: crc32(bytes),
            uploaded_at: now,
        };
        let manifest = self.dir.join("manifest.jsonl");
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest)
            .map_err(io_err(&manifest))?;
        let line = serde_json::to_string(&receipt).expect("receipt serializes");
        writeln!(file, "{line}").map_err(io_err(&manifest))?;

        self.versions.insert(key, version);
        self.receipts.push(receipt.clone());
        Ok(receipt)
    }

    /// Fetch blob bytes; `version: None` means the latest.
    pub fn get_blob(
        &self,
        container: &str,
        name: &str,
        version: Option<u32>,
    ) -> Result<Vec<u8>, CloudError> {
        let key = (container.to_string(), name.to_string());
        let latest = self
            .versions
            .get(&key)
            .copied()
            .ok_or_else(|| CloudError::BlobNotFound {
                container: container.to_string(),
                name: name.to_string(),
            })?;
        let version = version.unwrap_or(latest);
        if version == 0 || version > latest {
            return Err(CloudError::VersionNotFound {
                container: container.to_string(),
                name: name.to_string(),
                version,
            });
        }
        let path = self.dir.join(container).join(format!("{name}.v{version}"));
        std::fs::read(&path).map_err(io_err(&path))
    }

    pub fn latest_version(&self, container: &str, name: &str) -> Option<u32> {
        self.versions
            .get(&(container.to_string(), name.to_string()))
            .copied()
    }

    pub fn receipts(&self) -> &[BlobReceipt] {
        &self.receipts
    }

    pub fn total_bytes(&self) -> u64 {
        self.receipts.iter().map(|r| r.byte_count).sum()
    }
}

/// Header of every uploaded batch CSV.
pub const BATCH_CSV_HEADER: &[&str] = &[
    "seq",
    "timestamp_s",
    "category",
    "node_id",
    "kind",
    "value_name",
    "value",
    "label",
    "confidence",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingRow {
    pub node_id: u16,
    pub timestamp_s: u64,
    pub kind: String,
    pub value_name: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub node_id: u16,
    pub timestamp_s: u64,
    pub category: String,
    pub detail: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageLabelRow {
    pub image_id: String,
    pub timestamp_s: u64,
    pub label: String,
    pub confidence: f64,
    pub node_id: u16,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineRow {
    pub provenance: String,
    pub line: u64,
    pub reason: String,
    pub raw: String,
}

/// What one `parse_blob` call did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ParseStats {
    pub readings_added: u64,
    pub events_added: u64,
    pub labels_added: u64,
    pub quarantined: u64,
    /// True when the blob version had been parsed before and the call
    /// was a no-op.
    pub already_parsed: bool,
}

/// Typed tables distilled from uploaded batches. Parsing is idempotent
/// per blob version and quarantines malformed rows instead of failing
/// the whole batch.
#[derive(Debug)]
pub struct RecordStore {
    dir: PathBuf,
    readings: Vec<ReadingRow>,
    events: Vec<EventRow>,
    image_labels: Vec<ImageLabelRow>,
    quarantine: Vec<QuarantineRow>,
    parsed: BTreeSet<String>,
    queries_served: u64,
}

impl RecordStore {
    /// Open (or create) the record store under `root/record_store`.
    pub fn open(root: &Path) -> Result<Self, CloudError> {
        let dir = root.join("record_store");
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut store = RecordStore {
            dir,
            readings: Vec::new(),
            events: Vec::new(),
            image_labels: Vec::new(),
            quarantine: Vec::new(),
            parsed: BTreeSet::new(),
            queries_served: 0,
        };
        store.load()?;
        Ok(store)
    }

    fn load(&mut self) -> Result<(), CloudError> {
        fn read_table<T: serde::de::DeserializeOwned>(
            path: &Path,
        ) -> Result<Vec<T>, CloudError> {
            if !path.exists() {
                return Ok(Vec::new());
            }
            let mut reader = csv::Reader::from_path(path).map_err(|e| CloudError::Io {
                path: path.to_path_buf(),
                source: io::Error::other(e),
            })?;
            reader
                .deserialize()
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| CloudError::Io {
                    path: path.to_path_buf(),
                    source: io::Error::other(e),
                })
        }

        self.readings = read_table(&self.dir.join("readings.csv"))?;
        self.events = read_table(&self.dir.join("events.csv"))?;
        self.image_labels = read_table(&self.dir.join("image_labels.csv"))?;
        self.quarantine = read_table(&self.dir.join("quarantine.csv"))?;
        let parsed_path = self.dir.join("parsed.txt");
        if parsed_path.exists() {
            let text = std::fs::read_to_string(&parsed_path).map_err(io_err(&parsed_path))?;
            self.parsed = text.lines().map(str::to_string).collect();
        }
        Ok(())
    }

    fn persist(&self) -> Result<(), CloudError> {
        fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CloudError> {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in rows {
                writer.serialize(row).map_err(|e| CloudError::Io {
                    path: path.to_path_buf(),
                    source: io::Error::other(e),
                })?;
            }
            let bytes = writer.into_inner().expect("vec writer cannot fail");
            std::fs::write(path, bytes).map_err(io_err(path))
        }

        write_table(&self.dir.join("readings.csv"), &self.readings)?;
        write_table(&self.dir.join("events.csv"), &self.events)?;
        write_table(&self.dir.join("image_labels.csv"), &self.image_labels)?;
        write_table(&self.dir.join("quarantine.csv"), &self.quarantine)?;
        let parsed_path = self.dir.join("parsed.txt");
        let mut text = self.parsed.iter().cloned().collect::<Vec<_>>().join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        std::fs::write(&parsed_path, text).map_err(io_err(&parsed_path))?;
        Ok(())
    }

    /// Parse one stored batch blob into the typed tables.
    pub fn parse_blob(
        &mut self,
        blobs: &BlobStore,
        container: &str,
        name: &str,
        version: Option<u32>,
    ) -> Result<ParseStats, CloudError> {
        let version = match version {
            Some(v) => v,
            None => {
                blobs
                    .latest_version(container, name)
                    .ok_or_else(|| CloudError::BlobNotFound {
                        container: container.to_string(),
                        name: name.to_string(),
                    })?
            }
        };
        let key = format!("{container}/{name}.v{version}");
        if self.parsed.contains(&key) {
            return Ok(ParseStats {
                already_parsed: true,
                ..ParseStats::default()
            });
        }

        let bytes = blobs.get_blob(container, name, Some(version))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(bytes.as_slice());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| CloudError::BatchHeader {
                key: key.clone(),
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header != BATCH_CSV_HEADER {
            return Err(CloudError::BatchHeader {
                key,
                message: format!("expected `{}`", BATCH_CSV_HEADER.join(",")),
            });
        }

        let mut stats = ParseStats::default();
        for record in reader.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    self.quarantine.push(QuarantineRow {
                        provenance: key.clone(),
                        line: 0,
                        reason: e.to_string(),
                        raw: String::new(),
                    });
                    stats.quarantined += 1;
                    continue;
                }
            };
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let raw = record.iter().collect::<Vec<_>>().join(",");
            match parse_batch_row(&record, &key, line) {
                Ok(ParsedRow::Reading(row)) => {
                    self.readings.push(row);
                    stats.readings_added += 1;
                }
                Ok(ParsedRow::Event(row)) => {
                    self.events.push(row);
                    stats.events_added += 1;
                }
                Ok(ParsedRow::Label(row)) => {
                    self.image_labels.push(row);
                    stats.labels_added += 1;
                }
                Err(reason) => {
                    self.quarantine.push(QuarantineRow {
                        provenance: key.clone(),
                        line,
                        reason,
                        raw,
                    });
                    stats.quarantined += 1;
                }
            }
        }

        self.parsed.insert(key);
        self.persist()?;
        Ok(stats)
    }

    pub fn readings(&self) -> &[ReadingRow] {
        &self.readings
    }

    pub fn events(&self) -> &[EventRow] {
        &self.events
    }

    pub fn image_labels(&self) -> &[ImageLabelRow] {
        &self.image_labels
    }

    pub fn quarantined(&self) -> &[QuarantineRow] {
        &self.quarantine
    }

    /// Rows held across all tables, quarantine included.
    pub fn row_count(&self) -> u64 {
        (self.readings.len() + self.events.len() + self.image_labels.len() + self.quarantine.len())
            as u64
    }

    pub fn parse_count(&self) -> u64 {
        self.parsed.len() as u64
    }

    pub fn queries_served(&self) -> u64 {
        self.queries_served
    }

    /// Filter a table by field equality, optionally ordering by a field,
    /// and cap the row count. Numeric-looking values compare numerically
    /// so `400` matches `400.0`.
    pub fn query(
        &mut self,
        table: &str,
        filters: &[(String, String)],
        order_by: Option<&str>,
        limit: Option<usize>,
    ) -> Result<Vec<BTreeMap<String, String>>, CloudError> {
        let rows: Vec<BTreeMap<String, String>> = match table {
            "readings" => self.readings.iter().map(reading_fields).collect(),
            "events" => self.events.iter().map(event_fields).collect(),
            "image_labels" => self.image_labels.iter().map(label_fields).collect(),
            "quarantine" => self.quarantine.iter().map(quarantine_fields).collect(),
            other => return Err(CloudError::UnknownTable(other.to_string())),
        };

        let field_known = |field: &str| -> bool {
            match table {
                "readings" => READING_FIELDS.contains(&field),
                "events" => EVENT_FIELDS.contains(&field),
                "image_labels" => LABEL_FIELDS.contains(&field),
                "quarantine" => QUARANTINE_FIELDS.contains(&field),
                _ => false,
            }
        };
        for (field, _) in filters {
            if !field_known(field) {
                return Err(CloudError::UnknownField {
                    table: table.to_string(),
                    field: field.clone(),
                });
            }
        }
        if let Some(field) = order_by {
            if !field_known(field) {
                return Err(CloudError::UnknownField {
                    table: table.to_string(),
                    field: field.to_string(),
                });
            }
        }

        let mut out: Vec<BTreeMap<String, String>> = rows
            .into_iter()
            .filter(|row| {
                filters.iter().all(|(field, want)| {
                    let have = row.get(field).map(String::as_str).unwrap_or("");
                    values_equal(have, want)
                })
            })
            .collect();
        if let Some(field) = order_by {
            out.sort_by(|a, b| compare_values(&a[field], &b[field]));
        }
        if let Some(limit) = limit {
            out.truncate(limit);
        }
        // Rejected queries do no scan work and are not billed.
        self.queries_served += 1;
        Ok(out)
    }
}

const READING_FIELDS: &[&str] = &[
    "node_id",
    "timestamp_s",
    "kind",
    "value_name",
    "value",
    "provenance",
];
const EVENT_FIELDS: &[&str] = &["node_id", "timestamp_s", "category", "detail", "provenance"];
const LABEL_FIELDS: &[&str] = &[
    "image_id",
    "node_id",
    "timestamp_s",
    "label",
    "confidence",
    "provenance",
];
const QUARANTINE_FIELDS: &[&str] = &["provenance", "line", "reason", "raw"];

fn values_equal(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn compare_values(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        _ => a.cmp(b),
    }
}

fn reading_fields(row: &ReadingRow) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("node_id".into(), row.node_id.to_string()),
        ("timestamp_s".into(), row.timestamp_s.to_string()),
        ("kind".into(), row.kind.clone()),
        ("value_name".into(), row.value_name.clone()),
        ("value".into(), row.value.to_string()),
        ("provenance".into(), row.provenance.clone()),
    ])
}

fn event_fields(row: &EventRow) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("node_id".into(), row.node_id.to_string()),
        ("timestamp_s".into(), row.timestamp_s.to_string()),
        ("category".into(), row.category.clone()),
        ("detail".into(), row.detail.clone()),
        ("provenance".into(), row.provenance.clone()),
    ])
}

fn label_fields(row: &ImageLabelRow) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("image_id".into(), row.image_id.clone()),
        ("timestamp_s".into(), row.timestamp_s.to_string()),
        ("label".into(), row.label.clone()),
        ("confidence".into(), row.confidence.to_string()),
        ("node_id".into(), row.node_id.to_string()),
        ("provenance".into(), row.provenance.clone()),
    ])
}

fn quarantine_fields(row: &QuarantineRow) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("provenance".into(), row.provenance.clone()),
        ("line".into(), row.line.to_string()),
        ("reason".into(), row.reason.clone()),
        ("raw".into(), row.raw.clone()),
    ])
}

enum ParsedRow {
    Reading(ReadingRow),
    Event(EventRow),
    Label(ImageLabelRow),
}

fn parse_batch_row(
    record: &csv::StringRecord,
    blob_key: &str,
    line: u64,
) -> Result<ParsedRow, String> {
    if record.len() != BATCH_CSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, got {}",
            BATCH_CSV_HEADER.len(),
            record.len()
        ));
    }
    let field = |i: usize| record.get(i).unwrap_or("");
    let provenance = format!("{blob_key}:{line}");
    let node_id: u16 = field(3)
        .parse()
        .map_err(|_| format!("node_id `{}` is not a u16", field(3)))?;
    let timestamp_s: u64 = field(1)
        .parse()
        .map_err(|_| format!("timestamp_s `{}` is not a u64", field(1)))?;
    match field(2) {
        "sensor_reading" => {
            let value: f64 = field(6)
                .parse()
                .map_err(|_| format!("value `{}` is not a number", field(6)))?;
            Ok(ParsedRow::Reading(ReadingRow {
                node_id,
                timestamp_s,
                kind: field(4).to_string(),
                value_name: field(5).to_string(),
                value,
                provenance,
            }))
        }
        "trigger" => Ok(ParsedRow::Event(EventRow {
            node_id,
            timestamp_s,
            category: "trigger".to_string(),
            detail: field(6).to_string(),
            provenance,
        })),
        "image_capture" => {
            let confidence: f64 = field(8)
                .parse()
                .map_err(|_| format!("confidence `{}` is not a number", field(8)))?;
            Ok(ParsedRow::Label(ImageLabelRow {
                image_id: field(6).to_string(),
                timestamp_s,
                label: field(7).to_string(),
                confidence,
                node_id,
                provenance,
            }))
        }
        other => Err(format!("unknown category `{other}`")),
    }
}

/// Millipence prices per metered unit. Working in integer thousandths of
/// a penny keeps arithmetic exact; display rounds up to whole pence only
/// at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCard {
    pub currency: String,
    pub blob_gb_month_millipence: u64,
    pub parse_op_millipence: u64,
    pub row_month_millipence: u64,
    pub query_millipence: u64,
    pub label_record_millipence: u64,
}

/// Free units bundled with the platform plan, per meter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FreeAllowance {
    pub blob_gb_months: u64,
    pub parse_ops: u64,
    pub row_months: u64,
    pub queries: u64,
    pub label_records: u64,
}

/// Metered usage over one billing month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageCounters {
    pub blob_gb_months: u64,
    pub parse_ops: u64,
    pub row_months: u64,
    pub queries: u64,
    pub label_records: u64,
    pub free_tier: FreeAllowance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLine {
    pub meter: String,
    pub used: u64,
    pub free: u64,
    pub billable: u64,
    pub price_millipence: u64,
    pub cost_millipence: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub currency: String,
    pub lines: Vec<CostLine>,
    pub total_millipence: u64,
}

impl CostEstimate {
    /// Total rounded up to whole pence, the way the bill would print it.
    pub fn total_pence(&self) -> u64 {
        self.total_millipence.div_ceil(1000)
    }

    pub fn display_total(&self) -> String {
        let pence = self.total_pence();
        let symbol = if self.currency == "GBP" { "£" } else { "" };
        format!("{symbol}{}.{:02}", pence / 100, pence % 100)
    }
}

/// Price a month of usage against a rate card. Each meter bills only the
/// units beyond its free allowance.
pub fn estimate_cost(usage: &UsageCounters, rates: &RateCard) -> CostEstimate {
    let free = usage.free_tier;
    let meters: [(&str, u64, u64, u64); 5] = [
        (
            "blob_gb_months",
            usage.blob_gb_months,
            free.blob_gb_months,
            rates.blob_gb_month_millipence,
        ),
        ("parse_ops", usage.parse_ops, free.parse_ops, rates.parse_op_millipence),
        ("row_months", usage.row_months, free.row_months, rates.row_month_millipence),
        ("queries", usage.queries, free.queries, rates.query_millipence),
        (
            "label_records",
            usage.label_records,
            free.label_records,
            rates.label_record_millipence,
        ),
    ];
    let lines: Vec<CostLine> = meters
        .into_iter()
        .map(|(meter, used, free, price)| {
            let billable = used.saturating_sub(free);
            CostLine {
                meter: meter.to_string(),
                used,
                free,
                billable,
                price_millipence: price,
                cost_millipence: billable * price,
            }
        })
        .collect();
    let total_millipence = lines.iter().map(|l| l.cost_millipence).sum();
    CostEstimate {
        currency: rates.currency.clone(),
        lines,
        total_millipence,
    }
}
