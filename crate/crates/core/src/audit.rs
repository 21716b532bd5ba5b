//! Post-run privacy audit: sweep every artifact a run leaves on disk for
//! traces of image payloads that should have been purged on the hub.
//!
//! Two independent detectors run over each file:
//!
//! * fingerprint match: 16 bytes lifted from each captured image before the
//!   hub saw it. The bytes come from a seeded stream cipher, so an
//!   accidental 16-byte collision with ledger JSON or batch CSV text is
//!   not a realistic concern.
//! * magic match: the four-byte marker every synthetic image starts with.
//!   Catches a whole payload written somewhere no fingerprint was taken.
//!
//! A clean report is the acceptance condition; findings carry the path and
//! byte offset so a failure can be traced to the leaking writer.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::nodes::synth;

/// Bytes 8..24 of an image payload: the first 16 body bytes, past the
/// 8-byte header. Header bytes repeat across images (magic, scheme) and
/// would self-collide; body bytes are unique per capture.
pub const FINGERPRINT_OFFSET: usize = synth::HEADER_LEN;
pub const FINGERPRINT_LEN: usize = 16;

pub fn fingerprint(payload: &[u8]) -> Option<[u8; FINGERPRINT_LEN]> {
    let end = FINGERPRINT_OFFSET + FINGERPRINT_LEN;
    if payload.len() < end {
        return None;
    }
    let mut out = [0u8; FINGERPRINT_LEN];
    out.copy_from_slice(&payload[FINGERPRINT_OFFSET..end]);
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// A tracked 16-byte image fingerprint appeared verbatim.
    Fingerprint,
    /// The image format's magic marker appeared.
    Magic,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            FindingKind::Fingerprint => "image fingerprint",
            FindingKind::Magic => "image magic bytes",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub path: PathBuf,
    pub offset: u64,
    pub kind: FindingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub findings: Vec<Finding>,
    pub files_scanned: u64,
    pub bytes_scanned: u64,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.clean() {
            format!(
                "purge audit clean: {} files, {} bytes scanned",
                self.files_scanned, self.bytes_scanned
            )
        } else {
            let first = &self.findings[0];
            format!(
                "purge audit FAILED: {} finding(s), first {} at {}:{}",
                self.findings.len(),
                first.kind,
                first.path.display(),
                first.offset
            )
        }
    }
}

/// Scan every regular file under `dir` (recursively, in sorted order) for
/// the given fingerprints and for the image magic marker.
pub fn scan_run_dir(
    dir: &Path,
    fingerprints: &[[u8; FINGERPRINT_LEN]],
) -> io::Result<AuditReport> {
    let needles: HashSet<[u8; FINGERPRINT_LEN]> = fingerprints.iter().copied().collect();
    let mut report = AuditReport::default();
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    for path in files {
        let bytes = fs::read(&path)?;
        report.files_scanned += 1;
        report.bytes_scanned += bytes.len() as u64;
        scan_bytes(&path, &bytes, &needles, &mut report.findings);
    }
    Ok(report)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn scan_bytes(
    path: &Path,
    bytes: &[u8],
    needles: &HashSet<[u8; FINGERPRINT_LEN]>,
    findings: &mut Vec<Finding>,
) {
    if !needles.is_empty() {
        for (offset, window) in bytes.windows(FINGERPRINT_LEN).enumerate() {
            let key: [u8; FINGERPRINT_LEN] = window.try_into().expect("window length");
            if needles.contains(&key) {
                findings.push(Finding {
                    path: path.to_path_buf(),
                    offset: offset as u64,
                    kind: FindingKind::Fingerprint,
                });
            }
        }
    }
    for (offset, window) in bytes.windows(synth::MAGIC.len()).enumerate() {
        if window == synth::MAGIC {
            findings.push(Finding {
                path: path.to_path_buf(),
                offset: offset as u64,
                kind: FindingKind::Magic,
            });
        }
    }
}
