//! Deterministic scenario runner: one discrete-event loop that drives the
//! sensor nodes, both radio channels, the hub, and the cloud pipeline on a
//! single simulated clock, then writes every artifact of the run to one
//! output directory.
//!
//! Determinism contract: given the same config, environment script, and
//! seed, every persisted byte of `ledger.jsonl`, the cloud stores, and the
//! reports is identical, run after run. Wall-clock time appears only in
//! `run_meta.json`. The event heap orders ties by an explicit priority per
//! event kind and then by insertion order, so simultaneous events replay
//! in one fixed order.
//!
//! The acceleration setting is pure pacing: a factor sleeps just enough to
//! hold `simulated seconds / wall second` at the requested rate, and `max`
//! never sleeps. Nothing downstream of the pacing sleep reads the wall
//! clock, which is what makes results acceleration-invariant.
//!
//! Sources (samples, polls, hub timers, upload windows) stop at the
//! requested duration, inclusive; deliveries already in flight still
//! drain, so a reading emitted at the final instant lands a few simulated
//! seconds past it. The ledger keeps those tail entries.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit;
use crate::cloud::{
    estimate_cost, BlobStore, CloudError, CostEstimate, FreeAllowance, RateCard, RecordStore,
    UsageCounters,
};
use crate::config::{
    load_config, parse_config, serialize_config, validate_config, ConfigError, NodeSpec,
};
use crate::fixtures;
use crate::hub::{
    Category, CategoryCounts, Delivery, EntryDetail, EventLedger, Hub, HubError, LedgerEntry,
    StatusReport,
};
use crate::nodes::{
    capture_image, power_consumed, step_node, ActivityLog, EnvError, EnvironmentScript,
    ImageCapture, NodeState,
};
use crate::status::{StatusError, StatusServer};
use crate::transport::{
    decode_emission, BleAdvertisement, BleChannel, ChannelModel, TransferOutcome, WifiChannel,
};
use crate::vision::{EvalOutcome, OracleClassifier};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("duration must be a positive number of simulated seconds")]
    ZeroDuration,
    #[error("acceleration must be a positive number or \"max\", got {0:?}")]
    BadAcceleration(String),
    #[error(
        "environment script covers {script_start}..={script_end} s but the run needs 0..={duration_s} s"
    )]
    EnvCoverage {
        script_start: u64,
        script_end: u64,
        duration_s: u64,
    },
    #[error("{} already contains a run; refusing to overwrite its ledger", .0.display())]
    DirInUse(PathBuf),
    #[error("missing run artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("corrupt run artifact {}: {message}", .path.display())]
    CorruptArtifact { path: PathBuf, message: String },
    /// A module failure mid-run, stamped with where and when it happened.
    #[error("simulated t={time_s} s, {component}: {message}")]
    At {
        time_s: u64,
        component: &'static str,
        message: String,
    },
    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Hub(#[from] HubError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Status(#[from] StatusError),
}

impl ScenarioError {
    /// True for faults in the request itself, as opposed to faults while
    /// executing it. Callers map this to their exit code split.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ScenarioError::ZeroDuration
                | ScenarioError::BadAcceleration(_)
                | ScenarioError::EnvCoverage { .. }
                | ScenarioError::DirInUse(_)
                | ScenarioError::MissingArtifact(_)
                | ScenarioError::Config(_)
                | ScenarioError::Env(_)
                | ScenarioError::Status(StatusError::Bind { .. })
        )
    }
}

fn at<E: fmt::Display>(time_s: u64, component: &'static str) -> impl FnOnce(E) -> ScenarioError {
    move |err| ScenarioError::At {
        time_s,
        component,
        message: err.to_string(),
    }
}

/// How fast simulated time runs relative to the wall clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceleration {
    /// Simulated seconds per wall-clock second.
    Factor(f64),
    /// No pacing; the run proceeds as fast as it computes.
    Max,
}

impl Acceleration {
    pub fn parse(text: &str) -> Result<Acceleration, ScenarioError> {
        if text.eq_ignore_ascii_case("max") {
            return Ok(Acceleration::Max);
        }
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(Acceleration::Factor(x)),
            _ => Err(ScenarioError::BadAcceleration(text.to_string())),
        }
    }
}

impl fmt::Display for Acceleration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Acceleration::Factor(x) => write!(f, "{x}"),
            Acceleration::Max => f.write_str("max"),
        }
    }
}

/// What to run: which network, which scripted environment, for how long.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub config_path: PathBuf,
    pub env_path: PathBuf,
    pub duration_s: u64,
    pub seed: u64,
    pub acceleration: Acceleration,
}

/// Fault drill knobs. Zero everywhere means a clean run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultPlan {
    /// Fail this many leading upload attempts of every batch blob.
    pub blob_put_failures: u32,
    /// Corrupt this many camera transfers in flight.
    pub image_corruptions: u32,
}

/// Environment for a run: pricing inputs, fault drills, and an optional
/// live status endpoint to publish into.
pub struct RunOptions<'a> {
    pub rate_card: RateCard,
    pub free_allowance: FreeAllowance,
    pub faults: FaultPlan,
    pub status_server: Option<&'a StatusServer>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            rate_card: fixtures::rate_card(),
            free_allowance: fixtures::free_allowance(),
            faults: FaultPlan::default(),
            status_server: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePowerReport {
    pub node_id: u16,
    pub kind: String,
    pub model: String,
    pub consumed_mah: f64,
    pub mean_mah_per_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadSummary {
    /// Batches compiled and handed to the uploader.
    pub batches: u64,
    /// Individual put attempts, retries included.
    pub attempts: u64,
    /// Batches that reached blob storage.
    pub succeeded: u64,
    pub dead_lettered: u64,
    /// succeeded / batches; an upload-free run counts as 1.0.
    pub success_ratio: f64,
    pub readings_parsed: u64,
    pub events_parsed: u64,
    pub labels_parsed: u64,
    pub quarantined: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub captured: u64,
    /// Verdict label to count of images that received it.
    pub labels: BTreeMap<String, u64>,
}

/// The run's result sheet. Every field is recomputable from the artifacts
/// the run persists; [`recompute_report`] is the proof.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub duration_s: u64,
    pub total_entries: u64,
    pub counts: CategoryCounts,
    pub node_power: Vec<NodePowerReport>,
    pub uploads: UploadSummary,
    pub images: ImageSummary,
    /// Present only when a dataset evaluation was attached to the run.
    pub classifier_metrics: Option<EvalOutcome>,
    pub cost: CostEstimate,
}

/// Inputs a later process needs to recompute the report. This is the one
/// artifact that may hold wall-clock figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub duration_s: u64,
    pub acceleration: String,
    pub wall_seconds: f64,
    pub rate_card: RateCard,
    pub free_allowance: FreeAllowance,
}

/// Everything a finished run hands back to the caller. Image fingerprints
/// exist only here, in memory, for the purge audit; they are never
/// persisted.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub status: StatusReport,
    pub fingerprints: Vec<[u8; audit::FINGERPRINT_LEN]>,
    pub warnings: Vec<String>,
    pub out_dir: PathBuf,
}

// Tie-break order for events at the same simulated instant: stimuli fire
// before their own consequences can exist, arrivals land before captures
// they trigger, and the upload window closes only after everything else
// at that instant has been logged.
const PRIO_SAMPLE: u8 = 1;
const PRIO_POLL: u8 = 2;
const PRIO_HUB_TIMER: u8 = 3;
const PRIO_BLE_DELIVERY: u8 = 4;
const PRIO_CAPTURE: u8 = 5;
const PRIO_IMAGE_DELIVERY: u8 = 6;
const PRIO_WINDOW_CLOSE: u8 = 7;

#[derive(Debug)]
enum Event {
    Sample { node_id: u16 },
    Poll { node_id: u16 },
    Heartbeat,
    Housekeeping,
    BleDelivery { advertisement: BleAdvertisement, rssi_dbm: i16 },
    Capture { camera_id: u16 },
    ImageDelivery { image: ImageCapture },
    WindowClose { index: u64 },
}

#[derive(Debug)]
struct Scheduled {
    time: u64,
    priority: u8,
    seq: u64,
    event: Event,
}

impl Scheduled {
    fn key(&self) -> (u64, u8, u64) {
        (self.time, self.priority, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Default)]
struct Timeline {
    heap: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
}

impl Timeline {
    fn push(&mut self, time: u64, priority: u8, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Scheduled {
            time,
            priority,
            seq,
            event,
        }));
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop().map(|entry| entry.0)
    }
}

struct Runner {
    duration_s: u64,
    batch_window_s: u64,
    env: EnvironmentScript,
    hub: Hub,
    ble: BleChannel,
    wifi: WifiChannel,
    blobs: BlobStore,
    records: RecordStore,
    specs: BTreeMap<u16, NodeSpec>,
    states: BTreeMap<u16, NodeState>,
    poll_intervals: BTreeMap<u16, u64>,
    activity: ActivityLog,
    timeline: Timeline,
    fingerprints: Vec<[u8; audit::FINGERPRINT_LEN]>,
}

impl Runner {
    fn schedule_initial(&mut self) {
        let duration = self.duration_s;

        // Periodic nodes re-arm themselves in handle_sample; trigger nodes
        // get a sample at every scripted instant instead, since edges can
        // only happen where the script changes state.
        for spec in self.specs.values() {
            if spec.kind.is_periodic() {
                let cadence = spec.cadence_s.expect("validated periodic node has a cadence");
                if cadence <= duration {
                    self.timeline
                        .push(cadence, PRIO_SAMPLE, Event::Sample { node_id: spec.id });
                }
            }
        }
        let trigger_ids: Vec<u16> = self
            .specs
            .values()
            .filter(|s| s.kind.is_trigger())
            .map(|s| s.id)
            .collect();
        for gt in self.env.entries() {
            if gt.time_s == 0 || gt.time_s > duration {
                continue;
            }
            for &node_id in &trigger_ids {
                self.timeline
                    .push(gt.time_s, PRIO_SAMPLE, Event::Sample { node_id });
            }
        }

        for (&node_id, &interval) in &self.poll_intervals {
            if interval <= duration {
                self.timeline
                    .push(interval, PRIO_POLL, Event::Poll { node_id });
            }
        }
        if let Some(interval) = self.hub.settings().heartbeat_s {
            if interval <= duration {
                self.timeline.push(interval, PRIO_HUB_TIMER, Event::Heartbeat);
            }
        }
        if let Some(interval) = self.hub.settings().housekeeping_s {
            if interval <= duration {
                self.timeline
                    .push(interval, PRIO_HUB_TIMER, Event::Housekeeping);
            }
        }
        if self.batch_window_s <= duration {
            self.timeline
                .push(self.batch_window_s, PRIO_WINDOW_CLOSE, Event::WindowClose { index: 1 });
        }
    }

    fn handle(&mut self, time: u64, event: Event) -> Result<(), ScenarioError> {
        match event {
            Event::Sample { node_id } => self.handle_sample(time, node_id),
            Event::Poll { node_id } => self.handle_poll(time, node_id),
            Event::Heartbeat => self.handle_heartbeat(time),
            Event::Housekeeping => self.handle_housekeeping(time),
            Event::BleDelivery {
                advertisement,
                rssi_dbm,
            } => self.handle_ble_delivery(time, advertisement, rssi_dbm),
            Event::Capture { camera_id } => self.handle_capture(time, camera_id),
            Event::ImageDelivery { image } => self.handle_image_delivery(time, image),
            Event::WindowClose { index } => self.handle_window_close(time, index),
        }
    }

    fn handle_sample(&mut self, time: u64, node_id: u16) -> Result<(), ScenarioError> {
        let spec = self
            .specs
            .get(&node_id)
            .ok_or_else(|| ScenarioError::At {
                time_s: time,
                component: "scheduler",
                message: format!("sample for unknown node {node_id:#06x}"),
            })?
            .clone();
        let state = self
            .states
            .get_mut(&node_id)
            .expect("every sampled node has state");
        let emissions = step_node(&spec, state, time, &self.env).map_err(at(time, "node"))?;
        for emission in &emissions {
            let tx = self
                .ble
                .transmit(emission, spec.distance_m, time)
                .map_err(at(time, "ble transport"))?;
            if tx.delivered {
                self.timeline.push(
                    time + tx.latency_s,
                    PRIO_BLE_DELIVERY,
                    Event::BleDelivery {
                        advertisement: tx.advertisement,
                        rssi_dbm: tx.rssi_dbm,
                    },
                );
            }
        }
        if spec.kind.is_periodic() {
            let cadence = spec.cadence_s.expect("validated periodic node has a cadence");
            let next = time + cadence;
            if next <= self.duration_s {
                self.timeline.push(next, PRIO_SAMPLE, Event::Sample { node_id });
            }
        }
        Ok(())
    }

    fn handle_poll(&mut self, time: u64, node_id: u16) -> Result<(), ScenarioError> {
        self.hub
            .routine_check(node_id, time)
            .map_err(at(time, "hub"))?;
        let interval = self.poll_intervals[&node_id];
        let next = time + interval;
        if next <= self.duration_s {
            self.timeline.push(next, PRIO_POLL, Event::Poll { node_id });
        }
        Ok(())
    }

    fn handle_heartbeat(&mut self, time: u64) -> Result<(), ScenarioError> {
        self.hub.heartbeat(time).map_err(at(time, "hub"))?;
        let interval = self
            .hub
            .settings()
            .heartbeat_s
            .expect("heartbeat event exists only when configured");
        let next = time + interval;
        if next <= self.duration_s {
            self.timeline.push(next, PRIO_HUB_TIMER, Event::Heartbeat);
        }
        Ok(())
    }

    fn handle_housekeeping(&mut self, time: u64) -> Result<(), ScenarioError> {
        self.hub.housekeeping(time).map_err(at(time, "hub"))?;
        let interval = self
            .hub
            .settings()
            .housekeeping_s
            .expect("housekeeping event exists only when configured");
        let next = time + interval;
        if next <= self.duration_s {
            self.timeline.push(next, PRIO_HUB_TIMER, Event::Housekeeping);
        }
        Ok(())
    }

    fn handle_ble_delivery(
        &mut self,
        time: u64,
        advertisement: BleAdvertisement,
        rssi_dbm: i16,
    ) -> Result<(), ScenarioError> {
        let emission = decode_emission(&advertisement).map_err(at(time, "ble transport"))?;
        let outcome = self
            .hub
            .ingest(Delivery::Ble { emission, rssi_dbm }, time)
            .map_err(at(time, "hub"))?;
        if let Some(command) = outcome.capture {
            self.timeline.push(
                time,
                PRIO_CAPTURE,
                Event::Capture {
                    camera_id: command.camera_id,
                },
            );
        }
        Ok(())
    }

    fn handle_capture(&mut self, time: u64, camera_id: u16) -> Result<(), ScenarioError> {
        let spec = self
            .specs
            .get(&camera_id)
            .ok_or_else(|| ScenarioError::At {
                time_s: time,
                component: "scheduler",
                message: format!("capture command for unknown camera {camera_id:#06x}"),
            })?
            .clone();
        let image = capture_image(&spec, &self.env, time).map_err(at(time, "camera"))?;
        if let Some(print) = audit::fingerprint(&image.payload) {
            self.fingerprints.push(print);
        }
        let transfer = self
            .wifi
            .transmit(&image)
            .map_err(at(time, "wifi transport"))?;
        match transfer.outcome {
            TransferOutcome::Delivered => {
                // Camera activity is charged only for delivered transfers,
                // which keeps the power table recomputable from the ledger.
                self.activity
                    .record(camera_id, time, time + transfer.duration_s);
                self.timeline.push(
                    time + transfer.duration_s,
                    PRIO_IMAGE_DELIVERY,
                    Event::ImageDelivery { image },
                );
            }
            TransferOutcome::Failed { reason } => {
                self.hub
                    .system_note(
                        time,
                        Some(camera_id),
                        format!("image transfer failed: {reason}"),
                    )
                    .map_err(at(time, "hub"))?;
            }
        }
        Ok(())
    }

    fn handle_image_delivery(&mut self, time: u64, image: ImageCapture) -> Result<(), ScenarioError> {
        self.hub
            .ingest(Delivery::Image(image), time)
            .map_err(at(time, "hub"))?;
        Ok(())
    }

    fn handle_window_close(&mut self, time: u64, index: u64) -> Result<(), ScenarioError> {
        let width = self.batch_window_s;
        self.hub.compile_batch(((index - 1) * width, index * width));
        self.hub
            .flush_uploads(&mut self.blobs, &mut self.records, time)
            .map_err(at(time, "cloud pipeline"))?;
        let next = (index + 1) * width;
        if next <= self.duration_s {
            self.timeline
                .push(next, PRIO_WINDOW_CLOSE, Event::WindowClose { index: index + 1 });
        }
        Ok(())
    }
}

fn pace(acceleration: Acceleration, started: Instant, sim_time: u64) {
    if let Acceleration::Factor(factor) = acceleration {
        let target = Duration::from_secs_f64(sim_time as f64 / factor);
        let elapsed = started.elapsed();
        if target > elapsed {
            std::thread::sleep(target - elapsed);
        }
    }
}

/// Execute a scenario and persist its artifacts under `out_dir`:
/// `config.json`, `env_script.csv`, `ledger.jsonl`, the cloud stores under
/// `cloud/`, dead letters under `dead_letter/` if any, `report.json`,
/// `report.txt`, and `run_meta.json`.
pub fn run_scenario(
    spec: &ScenarioSpec,
    out_dir: &Path,
    options: &RunOptions<'_>,
) -> Result<RunOutcome, ScenarioError> {
    if spec.duration_s == 0 {
        return Err(ScenarioError::ZeroDuration);
    }
    let parsed = load_config(&spec.config_path)?;
    let warnings = parsed.warnings;
    let config = validate_config(parsed.config)?;
    let env = EnvironmentScript::from_csv_path(&spec.env_path)?;
    if env.start_time() > 0 || env.end_time() < spec.duration_s {
        return Err(ScenarioError::EnvCoverage {
            script_start: env.start_time(),
            script_end: env.end_time(),
            duration_s: spec.duration_s,
        });
    }

    fs::create_dir_all(out_dir).map_err(|source| ScenarioError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let ledger_path = out_dir.join("ledger.jsonl");
    if ledger_path.exists() {
        return Err(ScenarioError::DirInUse(out_dir.to_path_buf()));
    }
    write_text(&out_dir.join("config.json"), &serialize_config(config.get()))?;
    write_text(&out_dir.join("env_script.csv"), &env.to_csv_string())?;

    let ledger = EventLedger::with_file(&ledger_path)?;
    let mut hub = Hub::new(config.get(), Box::new(OracleClassifier::new()), ledger, 0);
    hub.set_dead_letter_dir(out_dir.join("dead_letter"));

    let cloud_root = out_dir.join("cloud");
    let mut blobs = BlobStore::open(&cloud_root)?;
    blobs.inject_put_failures(options.faults.blob_put_failures);
    let records = RecordStore::open(&cloud_root)?;
    let mut wifi = WifiChannel::new();
    wifi.inject_corruption(options.faults.image_corruptions);

    let specs: BTreeMap<u16, NodeSpec> = config.nodes.iter().map(|n| (n.id, n.clone())).collect();
    let mut states = BTreeMap::new();
    for node in specs.values() {
        if node.kind.is_periodic() || node.kind.is_trigger() {
            let state = NodeState::new(node, &env, 0).map_err(at(0, "node setup"))?;
            states.insert(node.id, state);
        }
    }
    let poll_intervals: BTreeMap<u16, u64> = specs
        .keys()
        .map(|&id| (id, hub.settings().poll_interval_for(id)))
        .collect();
    let batch_window_s = hub.settings().batch_window_s;

    let mut runner = Runner {
        duration_s: spec.duration_s,
        batch_window_s,
        env,
        hub,
        ble: BleChannel::new(ChannelModel::default(), spec.seed),
        wifi,
        blobs,
        records,
        specs,
        states,
        poll_intervals,
        activity: ActivityLog::new(),
        timeline: Timeline::default(),
        fingerprints: Vec::new(),
    };
    runner.schedule_initial();

    let started = Instant::now();
    let mut last_time = 0u64;
    let mut published = 0usize;
    while let Some(scheduled) = runner.timeline.pop() {
        debug_assert!(scheduled.time >= last_time, "event heap went backwards");
        pace(spec.acceleration, started, scheduled.time);
        last_time = scheduled.time;
        runner.handle(scheduled.time, scheduled.event)?;
        if let Some(server) = options.status_server {
            let entries = runner.hub.ledger().entries();
            server.publish(&runner.hub.status_snapshot(last_time), &entries[published..])?;
            published = entries.len();
        }
    }
    let end_time = last_time.max(spec.duration_s);
    runner.hub.ledger_mut().flush()?;

    let counts = runner.hub.ledger().counts();
    let usage = usage_from(&runner.blobs, &runner.records, options.free_allowance);
    let report = RunReport {
        seed: spec.seed,
        duration_s: spec.duration_s,
        total_entries: counts.total(),
        counts,
        node_power: power_table(
            &config.nodes,
            spec.duration_s,
            &runner.activity,
        ),
        uploads: summarize_uploads(runner.hub.ledger().entries(), &runner.records),
        images: summarize_images(runner.hub.ledger().entries()),
        classifier_metrics: None,
        cost: estimate_cost(&usage, &options.rate_card),
    };
    let status = runner.hub.status_snapshot(end_time);
    if let Some(server) = options.status_server {
        let entries = runner.hub.ledger().entries();
        server.publish(&status, &entries[published..])?;
    }

    let meta = RunMeta {
        seed: spec.seed,
        duration_s: spec.duration_s,
        acceleration: spec.acceleration.to_string(),
        wall_seconds: started.elapsed().as_secs_f64(),
        rate_card: options.rate_card.clone(),
        free_allowance: options.free_allowance,
    };
    write_json(&out_dir.join("run_meta.json"), &meta)?;
    write_json(&out_dir.join("report.json"), &report)?;
    write_text(&out_dir.join("report.txt"), &render_report(&report))?;

    Ok(RunOutcome {
        report,
        status,
        fingerprints: runner.fingerprints,
        warnings,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Rebuild the report for a finished run purely from what it left on
/// disk. Matching [`RunReport`] field for field against the emitted
/// `report.json` is the recomputability check.
pub fn recompute_report(run_dir: &Path) -> Result<RunReport, ScenarioError> {
    let meta: RunMeta = read_json(&run_dir.join("run_meta.json"))?;
    let config_path = run_dir.join("config.json");
    if !config_path.exists() {
        return Err(ScenarioError::MissingArtifact(config_path));
    }
    let config_text = fs::read_to_string(&config_path).map_err(|source| ScenarioError::Io {
        path: config_path,
        source,
    })?;
    let config = validate_config(parse_config(&config_text)?.config)?;

    let ledger_path = run_dir.join("ledger.jsonl");
    if !ledger_path.exists() {
        return Err(ScenarioError::MissingArtifact(ledger_path));
    }
    let entries = EventLedger::load(&ledger_path)?;
    let counts = CategoryCounts::tally(&entries);

    let cloud_root = run_dir.join("cloud");
    let blobs = BlobStore::open(&cloud_root)?;
    let records = RecordStore::open(&cloud_root)?;
    let usage = usage_from(&blobs, &records, meta.free_allowance);

    Ok(RunReport {
        seed: meta.seed,
        duration_s: meta.duration_s,
        total_entries: counts.total(),
        counts,
        node_power: power_table(&config.nodes, meta.duration_s, &activity_from(&entries)),
        uploads: summarize_uploads(&entries, &records),
        images: summarize_images(&entries),
        classifier_metrics: None,
        cost: estimate_cost(&usage, &meta.rate_card),
    })
}

/// Camera duty intervals as recorded by the ledger: each delivered image
/// spans capture to arrival.
fn activity_from(entries: &[LedgerEntry]) -> ActivityLog {
    let mut activity = ActivityLog::new();
    for entry in entries {
        if let EntryDetail::Image { captured_at, .. } = &entry.detail {
            if let Some(node_id) = entry.node_id {
                activity.record(node_id, *captured_at, entry.timestamp);
            }
        }
    }
    activity
}

fn power_table(nodes: &[NodeSpec], duration_s: u64, activity: &ActivityLog) -> Vec<NodePowerReport> {
    let hours = duration_s as f64 / 3600.0;
    nodes
        .iter()
        .map(|spec| {
            let consumed = power_consumed(spec, (0, duration_s), activity);
            NodePowerReport {
                node_id: spec.id,
                kind: spec.kind.label().to_string(),
                model: spec.kind.model().to_string(),
                consumed_mah: consumed,
                mean_mah_per_h: consumed / hours,
            }
        })
        .collect()
}

fn summarize_uploads(entries: &[LedgerEntry], records: &RecordStore) -> UploadSummary {
    let mut attempts = 0u64;
    let mut batch_ids = BTreeSet::new();
    let mut succeeded_ids = BTreeSet::new();
    for entry in entries {
        if let EntryDetail::Network {
            batch_id, outcome, ..
        } = &entry.detail
        {
            attempts += 1;
            batch_ids.insert(*batch_id);
            if outcome == "success" {
                succeeded_ids.insert(*batch_id);
            }
        }
    }
    let batches = batch_ids.len() as u64;
    let succeeded = succeeded_ids.len() as u64;
    UploadSummary {
        batches,
        attempts,
        succeeded,
        dead_lettered: batches - succeeded,
        success_ratio: if batches == 0 {
            1.0
        } else {
            succeeded as f64 / batches as f64
        },
        readings_parsed: records.readings().len() as u64,
        events_parsed: records.events().len() as u64,
        labels_parsed: records.image_labels().len() as u64,
        quarantined: records.quarantined().len() as u64,
    }
}

fn summarize_images(entries: &[LedgerEntry]) -> ImageSummary {
    let mut labels: BTreeMap<String, u64> = BTreeMap::new();
    let mut captured = 0u64;
    for entry in entries {
        if let EntryDetail::Image { label, .. } = &entry.detail {
            captured += 1;
            *labels.entry(label.clone()).or_insert(0) += 1;
        }
    }
    ImageSummary { captured, labels }
}

fn usage_from(blobs: &BlobStore, records: &RecordStore, free: FreeAllowance) -> UsageCounters {
    UsageCounters {
        blob_gb_months: blobs.total_bytes().div_ceil(1_000_000_000),
        parse_ops: records.parse_count(),
        row_months: records.row_count(),
        queries: records.queries_served(),
        label_records: records.image_labels().len() as u64,
        free_tier: free,
    }
}

/// Text form of the report, written beside the JSON.
pub fn render_report(report: &RunReport) -> String {
    use std::fmt::Write as _;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "run summary: seed {}, duration {} s",
        report.seed, report.duration_s
    );
    let _ = writeln!(out, "ledger entries: {}", report.total_entries);
    for category in Category::all() {
        let _ = writeln!(
            out,
            "  {:<16} {:>7}",
            category.label(),
            report.counts.get(category)
        );
    }

    let _ = writeln!(out, "power:");
    for row in &report.node_power {
        let _ = writeln!(
            out,
            "  node {:>3}  {:<14} {:<8} {:>10.3} mAh  {:>8.3} mAh/h",
            row.node_id, row.model, row.kind, row.consumed_mah, row.mean_mah_per_h
        );
    }

    let up = &report.uploads;
    let _ = writeln!(
        out,
        "uploads: {} batches, {} succeeded, {} dead-lettered, {} attempts (success ratio {:.3})",
        up.batches, up.succeeded, up.dead_lettered, up.attempts, up.success_ratio
    );
    let _ = writeln!(
        out,
        "  parsed rows: {} readings, {} events, {} labels, {} quarantined",
        up.readings_parsed, up.events_parsed, up.labels_parsed, up.quarantined
    );

    let _ = writeln!(out, "images: {} captured", report.images.captured);
    for (label, count) in &report.images.labels {
        let _ = writeln!(out, "  {label:<12} {count:>5}");
    }
    if let Some(metrics) = &report.classifier_metrics {
        let _ = writeln!(out, "classifier accuracy: {:.4}", metrics.accuracy);
    }

    let _ = writeln!(out, "monthly cost estimate ({}):", report.cost.currency);
    for line in &report.cost.lines {
        let _ = writeln!(
            out,
            "  {:<16} used {:>8}, free {:>8}, billable {:>8} -> {} millipence",
            line.meter, line.used, line.free, line.billable, line.cost_millipence
        );
    }
    let _ = writeln!(out, "  total {}", report.cost.display_total());
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), ScenarioError> {
    fs::write(path, text).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ScenarioError> {
    let mut text = serde_json::to_string_pretty(value).expect("run artifacts serialize");
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ScenarioError> {
    if !path.exists() {
        return Err(ScenarioError::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ScenarioError::CorruptArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::status::testclient;

    // One hour of the bundled day: polls 75+75+75 (48 s) + 78 (46 s) +
    // 72 (50 s) + 67 (53 s) = 442; readings 12*2 dht22 + 8 ultrasonic =
    // 32; pulses 0..=6 fire, so 7 triggers and 7 images; 21 windows of
    // 164 s close by 3600; heartbeats 75, no housekeeping yet.
    const HOUR: u64 = 3600;

    fn fixture_spec(dir: &Path, duration_s: u64, seed: u64) -> ScenarioSpec {
        fixtures::write_all(dir).unwrap();
        ScenarioSpec {
            config_path: dir.join("wsn_config.json"),
            env_path: dir.join("museum_24h.csv"),
            duration_s,
            seed,
            acceleration: Acceleration::Max,
        }
    }

    fn run_hour(dir: &Path, options: &RunOptions<'_>) -> RunOutcome {
        let spec = fixture_spec(dir, HOUR, 7);
        run_scenario(&spec, &dir.join("out"), options).unwrap()
    }

    #[test]
    fn hour_run_reproduces_the_scripted_counts() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_hour(dir.path(), &RunOptions::default());
        let report = &outcome.report;

        assert_eq!(report.counts.routine_check, 442);
        assert_eq!(report.counts.sensor_reading, 32);
        assert_eq!(report.counts.trigger, 7);
        assert_eq!(report.counts.image_capture, 7);
        assert_eq!(report.counts.network_request, 21);
        assert_eq!(report.counts.system, 75);
        assert_eq!(report.total_entries, 584);

        assert_eq!(report.uploads.batches, 21);
        assert_eq!(report.uploads.succeeded, 21);
        assert_eq!(report.uploads.dead_lettered, 0);
        assert_eq!(report.uploads.success_ratio, 1.0);
        // Entries delivered after the last window close stay unbatched:
        // the dht22 pair from the t=3600 sample and the t=3576 ultrasonic
        // reading, plus the seventh trigger and image.
        assert_eq!(report.uploads.readings_parsed, 29);
        assert_eq!(report.uploads.events_parsed, 6);
        assert_eq!(report.uploads.labels_parsed, 6);
        assert_eq!(report.uploads.quarantined, 0);

        assert_eq!(report.images.captured, 7);
        let expected: BTreeMap<String, u64> =
            [("acceptable".to_string(), 4), ("risky".to_string(), 3)]
                .into_iter()
                .collect();
        assert_eq!(report.images.labels, expected);

        // One simulated hour: the flat-rate nodes sit exactly on their
        // hourly draw; the camera adds 7 transfers of 4 s at the active
        // rate.
        let by_id: BTreeMap<u16, &NodePowerReport> =
            report.node_power.iter().map(|r| (r.node_id, r)).collect();
        assert_eq!(by_id[&1].mean_mah_per_h, 84.0);
        assert_eq!(by_id[&2].mean_mah_per_h, 114.0);
        assert_eq!(by_id[&3].mean_mah_per_h, 54.0);
        assert_eq!(by_id[&4].mean_mah_per_h, 60.0);
        assert_eq!(by_id[&5].mean_mah_per_h, 54.0);
        let camera = by_id[&6].mean_mah_per_h;
        assert!((120.0..=126.0).contains(&camera), "camera at {camera}");

        assert_eq!(report.cost.display_total(), "£0.00");
        assert_eq!(outcome.status.counts, report.counts);
        assert!(outcome.warnings.is_empty());
        assert_eq!(outcome.fingerprints.len(), 7);
    }

    #[test]
    fn ledgers_are_byte_identical_for_the_same_seed() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture_spec(dir.path(), HOUR, 41);
        let a = run_scenario(&spec, &dir.path().join("a"), &RunOptions::default()).unwrap();
        let b = run_scenario(&spec, &dir.path().join("b"), &RunOptions::default()).unwrap();

        let ledger_a = fs::read(dir.path().join("a/ledger.jsonl")).unwrap();
        let ledger_b = fs::read(dir.path().join("b/ledger.jsonl")).unwrap();
        assert!(!ledger_a.is_empty());
        assert_eq!(ledger_a, ledger_b);
        assert_eq!(a.report, b.report);

        let report_a = fs::read(dir.path().join("a/report.json")).unwrap();
        let report_b = fs::read(dir.path().join("b/report.json")).unwrap();
        assert_eq!(report_a, report_b);
    }

    #[test]
    fn recomputed_report_matches_the_emitted_report() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_hour(dir.path(), &RunOptions::default());
        let recomputed = recompute_report(&outcome.out_dir).unwrap();
        assert_eq!(recomputed, outcome.report);

        let emitted: RunReport =
            read_json(&outcome.out_dir.join("report.json")).unwrap();
        assert_eq!(emitted, recomputed);
    }

    #[test]
    fn run_artifacts_never_hold_image_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_hour(dir.path(), &RunOptions::default());
        assert_eq!(outcome.fingerprints.len(), 7);
        let audit = audit::scan_run_dir(&outcome.out_dir, &outcome.fingerprints).unwrap();
        assert!(audit.clean(), "{}", audit.summary());
        assert!(audit.files_scanned > 20);
    }

    #[test]
    fn upload_retries_absorb_injected_blob_faults() {
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            faults: FaultPlan {
                blob_put_failures: 2,
                image_corruptions: 0,
            },
            ..RunOptions::default()
        };
        let outcome = run_hour(dir.path(), &options);
        let report = &outcome.report;

        // Two failures and one success per batch, all within the retry
        // budget of 3.
        assert_eq!(report.counts.network_request, 63);
        assert_eq!(report.uploads.attempts, 63);
        assert_eq!(report.uploads.batches, 21);
        assert_eq!(report.uploads.succeeded, 21);
        assert_eq!(report.uploads.dead_lettered, 0);
        assert_eq!(report.uploads.success_ratio, 1.0);
        assert_eq!(report.uploads.readings_parsed, 29);

        let recomputed = recompute_report(&outcome.out_dir).unwrap();
        assert_eq!(recomputed, outcome.report);
    }

    #[test]
    fn exhausted_retries_dead_letter_the_batch() {
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            faults: FaultPlan {
                blob_put_failures: 4,
                image_corruptions: 0,
            },
            ..RunOptions::default()
        };
        let outcome = run_hour(dir.path(), &options);
        let report = &outcome.report;

        assert_eq!(report.uploads.batches, 21);
        assert_eq!(report.uploads.succeeded, 0);
        assert_eq!(report.uploads.dead_lettered, 21);
        assert_eq!(report.uploads.success_ratio, 0.0);
        assert_eq!(report.uploads.attempts, 84);
        assert_eq!(report.counts.system, 75 + 21);
        assert_eq!(report.uploads.readings_parsed, 0);

        let dead: Vec<_> = fs::read_dir(outcome.out_dir.join("dead_letter"))
            .unwrap()
            .collect();
        assert_eq!(dead.len(), 21);

        // Dead letters hold batch rows, never image payloads.
        let audit = audit::scan_run_dir(&outcome.out_dir, &outcome.fingerprints).unwrap();
        assert!(audit.clean(), "{}", audit.summary());
    }

    #[test]
    fn corrupted_image_transfer_is_logged_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            faults: FaultPlan {
                blob_put_failures: 0,
                image_corruptions: 1,
            },
            ..RunOptions::default()
        };
        let outcome = run_hour(dir.path(), &options);
        let report = &outcome.report;

        assert_eq!(report.counts.trigger, 7);
        assert_eq!(report.counts.image_capture, 6);
        // The first pulse is the close-approach one, so the lost frame
        // was a risky scene.
        assert_eq!(report.images.labels["risky"], 2);
        assert_eq!(report.images.labels["acceptable"], 4);
        assert_eq!(report.counts.system, 76);
        // The camera still captured 7 frames; the failed transfer is
        // tracked for the purge audit too.
        assert_eq!(outcome.fingerprints.len(), 7);

        let recomputed = recompute_report(&outcome.out_dir).unwrap();
        assert_eq!(recomputed, outcome.report);
    }

    #[test]
    fn pacing_factor_changes_nothing_simulated() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = fixture_spec(dir.path(), 900, 7);
        run_scenario(&spec, &dir.path().join("fast"), &RunOptions::default()).unwrap();
        spec.acceleration = Acceleration::Factor(18_000.0);
        run_scenario(&spec, &dir.path().join("paced"), &RunOptions::default()).unwrap();

        let fast = fs::read(dir.path().join("fast/ledger.jsonl")).unwrap();
        let paced = fs::read(dir.path().join("paced/ledger.jsonl")).unwrap();
        assert_eq!(fast, paced);

        let fast_report = fs::read(dir.path().join("fast/report.json")).unwrap();
        let paced_report = fs::read(dir.path().join("paced/report.json")).unwrap();
        assert_eq!(fast_report, paced_report);
    }

    #[test]
    fn zero_duration_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture_spec(dir.path(), 0, 7);
        let err = run_scenario(&spec, &dir.path().join("out"), &RunOptions::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::ZeroDuration));
        assert!(err.is_validation());
    }

    #[test]
    fn occupied_output_dir_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture_spec(dir.path(), 900, 7);
        let out = dir.path().join("out");
        run_scenario(&spec, &out, &RunOptions::default()).unwrap();
        let err = run_scenario(&spec, &out, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::DirInUse(_)));
        assert!(err.is_validation());
    }

    #[test]
    fn short_environment_script_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = fixture_spec(dir.path(), fixtures::DAY_S + 1, 7);
        let err = run_scenario(&spec, &dir.path().join("out"), &RunOptions::default()).unwrap_err();
        match err {
            ScenarioError::EnvCoverage {
                script_end,
                duration_s,
                ..
            } => {
                assert_eq!(script_end, fixtures::DAY_S);
                assert_eq!(duration_s, fixtures::DAY_S + 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn acceleration_parses_factors_and_max() {
        assert_eq!(Acceleration::parse("max").unwrap(), Acceleration::Max);
        assert_eq!(Acceleration::parse("MAX").unwrap(), Acceleration::Max);
        assert_eq!(
            Acceleration::parse("3600").unwrap(),
            Acceleration::Factor(3600.0)
        );
        assert_eq!(
            Acceleration::parse("0.5").unwrap(),
            Acceleration::Factor(0.5)
        );
        for bad in ["0", "-1", "nan", "inf", "", "fast"] {
            assert!(Acceleration::parse(bad).is_err(), "{bad:?} should fail");
        }
        assert_eq!(Acceleration::Max.to_string(), "max");
        assert_eq!(Acceleration::Factor(2.5).to_string(), "2.5");
    }

    #[test]
    fn status_endpoint_serves_the_finished_run() {
        let dir = tempfile::tempdir().unwrap();
        let server = StatusServer::bind(0).unwrap();
        let options = RunOptions {
            status_server: Some(&server),
            ..RunOptions::default()
        };
        let outcome = run_hour(dir.path(), &options);

        let (code, body) = testclient::get(server.port(), "/status");
        assert_eq!(code, 200);
        let status: StatusReport = serde_json::from_str(&body).unwrap();
        assert_eq!(status.counts, outcome.report.counts);
        assert_eq!(status.node_count, 6);

        let (code, body) = testclient::get(server.port(), "/ledger");
        assert_eq!(code, 200);
        assert_eq!(body.lines().count() as u64, outcome.report.total_entries);
        let first: LedgerEntry = serde_json::from_str(body.lines().next().unwrap()).unwrap();
        assert_eq!(first.seq, 0);
    }
}
