//! Tiny embedded HTTP endpoint exposing a run's live state: `GET /status`
//! returns the latest hub snapshot as JSON, `GET /ledger` streams the event
//! ledger as newline-delimited JSON (`?from=N` resumes mid-stream).
//!
//! The server is read-only and serves prerendered strings, so the accept
//! loop never touches hub state and cannot slow the simulation down. One
//! thread, blocking handlers, `Connection: close` on every response; status
//! polling is a once-a-second affair, not a throughput problem.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use crate::hub::{LedgerEntry, StatusReport};

#[derive(Debug, Error)]
pub enum StatusError {
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: io::Error },
    #[error("cannot serialize status payload: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Default)]
struct SharedState {
    status_json: String,
    ledger_lines: Vec<String>,
}

#[derive(Debug)]
pub struct StatusServer {
    shared: Arc<Mutex<SharedState>>,
    shutdown: Arc<AtomicBool>,
    port: u16,
    handle: Option<JoinHandle<()>>,
}

impl StatusServer {
    /// Listen on 127.0.0.1:`port`; 0 picks an ephemeral port. A port that
    /// is already taken is a startup error, not something to retry.
    pub fn bind(port: u16) -> Result<StatusServer, StatusError> {
        let listener = TcpListener::bind(("127.0.0.1", port))
            .and_then(|l| l.set_nonblocking(true).map(|()| l))
            .map_err(|source| StatusError::Bind { port, source })?;
        let bound = listener
            .local_addr()
            .map_err(|source| StatusError::Bind { port, source })?
            .port();
        let shared = Arc::new(Mutex::new(SharedState {
            status_json: "{}".to_string(),
            ledger_lines: Vec::new(),
        }));
        let shutdown = Arc::new(AtomicBool::new(false));
        let handle = {
            let shared = Arc::clone(&shared);
            let shutdown = Arc::clone(&shutdown);
            std::thread::spawn(move || serve_loop(listener, shared, shutdown))
        };
        Ok(StatusServer {
            shared,
            shutdown,
            port: bound,
            handle: Some(handle),
        })
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// Swap in the latest snapshot and append ledger entries written since
    /// the previous publish.
    pub fn publish(
        &self,
        status: &StatusReport,
        new_entries: &[LedgerEntry],
    ) -> Result<(), StatusError> {
        let status_json = serde_json::to_string(status)?;
        let mut lines = Vec::with_capacity(new_entries.len());
        for entry in new_entries {
            lines.push(serde_json::to_string(entry)?);
        }
        let mut state = lock(&self.shared);
        state.status_json = status_json;
        state.ledger_lines.extend(lines);
        Ok(())
    }
}

impl Drop for StatusServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn lock(shared: &Mutex<SharedState>) -> std::sync::MutexGuard<'_, SharedState> {
    shared.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn serve_loop(listener: TcpListener, shared: Arc<Mutex<SharedState>>, shutdown: Arc<AtomicBool>) {
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let _ = handle_conn(stream, &shared);
            }
            Err(err) if err.kind() == io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(_) => std::thread::sleep(Duration::from_millis(10)),
        }
    }
}

const MAX_REQUEST_BYTES: usize = 8 * 1024;

fn handle_conn(mut stream: TcpStream, shared: &Mutex<SharedState>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_millis(500)))?;

    let mut request = Vec::new();
    let mut chunk = [0u8; 1024];
    while !request.windows(4).any(|w| w == b"\r\n\r\n") {
        let n = stream.read(&mut chunk)?;
        if n == 0 {
            break;
        }
        request.extend_from_slice(&chunk[..n]);
        if request.len() > MAX_REQUEST_BYTES {
            return respond(&mut stream, 400, "text/plain", "request too large\n");
        }
    }

    let head = String::from_utf8_lossy(&request);
    let mut parts = head.lines().next().unwrap_or("").split_whitespace();
    let (method, target) = match (parts.next(), parts.next()) {
        (Some(m), Some(t)) => (m, t),
        _ => return respond(&mut stream, 400, "text/plain", "malformed request\n"),
    };
    if method != "GET" {
        return respond(&mut stream, 405, "text/plain", "method not allowed\n");
    }

    let (path, query) = match target.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (target, None),
    };
    match path {
        "/status" => {
            let body = lock(shared).status_json.clone();
            respond(&mut stream, 200, "application/json", &body)
        }
        "/ledger" => {
            let from = match ledger_offset(query) {
                Some(from) => from,
                None => return respond(&mut stream, 400, "text/plain", "bad from parameter\n"),
            };
            let state = lock(shared);
            let start = from.min(state.ledger_lines.len());
            let mut body = state.ledger_lines[start..].join("\n");
            drop(state);
            if !body.is_empty() {
                body.push('\n');
            }
            respond(&mut stream, 200, "application/x-ndjson", &body)
        }
        _ => respond(&mut stream, 404, "text/plain", "not found\n"),
    }
}

fn ledger_offset(query: Option<&str>) -> Option<usize> {
    let query = match query {
        None => return Some(0),
        Some(q) => q,
    };
    for pair in query.split('&') {
        if let Some(value) = pair.strip_prefix("from=") {
            return value.parse().ok();
        }
    }
    Some(0)
}

fn respond(stream: &mut TcpStream, code: u16, content_type: &str, body: &str) -> io::Result<()> {
    let reason = match code {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {code} {reason}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

/// Minimal blocking HTTP client for exercising the endpoint from tests.
#[cfg(test)]
pub(crate) mod testclient {
    use std::io::{Read, Write};
    use std::net::TcpStream;
    use std::time::Duration;

    pub fn get(port: u16, path: &str) -> (u16, String) {
        request(port, &format!("GET {path} HTTP/1.1\r\nHost: x\r\n\r\n"))
    }

    pub fn request(port: u16, raw: &str) -> (u16, String) {
        let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
        stream
            .set_read_timeout(Some(Duration::from_secs(5)))
            .unwrap();
        stream.write_all(raw.as_bytes()).unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        let code: u16 = response
            .split_whitespace()
            .nth(1)
            .expect("status code")
            .parse()
            .unwrap();
        let body = response
            .split_once("\r\n\r\n")
            .map(|(_, b)| b.to_string())
            .unwrap_or_default();
        (code, body)
    }
}

#[cfg(test)]
mod tests {
    use super::testclient::{get, request};
    use super::*;
    use crate::hub::{Category, CategoryCounts, EntryDetail};
    use std::collections::BTreeMap;

    fn sample_status() -> StatusReport {
        StatusReport {
            uptime_s: 120,
            config_version: 1,
            classifier: "baseline-histogram".to_string(),
            node_count: 6,
            upload_queue_depth: 0,
            counts: CategoryCounts {
                system: 2,
                ..CategoryCounts::default()
            },
            last_readings: BTreeMap::new(),
        }
    }

    fn sample_entries() -> Vec<LedgerEntry> {
        (0..3)
            .map(|seq| LedgerEntry {
                seq,
                timestamp: 48 * (seq + 1),
                category: Category::System,
                node_id: None,
                detail: EntryDetail::System {
                    note: "heartbeat ok".to_string(),
                },
            })
            .collect()
    }

    #[test]
    fn serves_status_and_ledger() {
        let server = StatusServer::bind(0).unwrap();
        server.publish(&sample_status(), &sample_entries()).unwrap();

        let (code, body) = get(server.port(), "/status");
        assert_eq!(code, 200);
        let status: StatusReport = serde_json::from_str(&body).unwrap();
        assert_eq!(status.uptime_s, 120);
        assert_eq!(status.counts.system, 2);

        let (code, body) = get(server.port(), "/ledger");
        assert_eq!(code, 200);
        let entries: Vec<LedgerEntry> = body
            .lines()
            .map(|line| serde_json::from_str(line).unwrap())
            .collect();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[2].timestamp, 144);
    }

    #[test]
    fn ledger_tail_resumes_from_offset() {
        let server = StatusServer::bind(0).unwrap();
        server.publish(&sample_status(), &sample_entries()).unwrap();

        let (code, body) = get(server.port(), "/ledger?from=1");
        assert_eq!(code, 200);
        assert_eq!(body.lines().count(), 2);

        let (code, body) = get(server.port(), "/ledger?from=99");
        assert_eq!(code, 200);
        assert!(body.is_empty());

        let (code, _) = get(server.port(), "/ledger?from=banana");
        assert_eq!(code, 400);
    }

    #[test]
    fn unknown_path_is_404_and_non_get_is_405() {
        let server = StatusServer::bind(0).unwrap();
        let (code, _) = get(server.port(), "/nope");
        assert_eq!(code, 404);
        let (code, _) = request(
            server.port(),
            "POST /status HTTP/1.1\r\nHost: x\r\nContent-Length: 0\r\n\r\n",
        );
        assert_eq!(code, 405);
    }

    #[test]
    fn status_before_first_publish_is_an_empty_object() {
        let server = StatusServer::bind(0).unwrap();
        let (code, body) = get(server.port(), "/status");
        assert_eq!(code, 200);
        assert_eq!(body, "{}");
    }

    #[test]
    fn taken_port_is_a_bind_error() {
        let server = StatusServer::bind(0).unwrap();
        let err = StatusServer::bind(server.port()).unwrap_err();
        match err {
            StatusError::Bind { port, .. } => assert_eq!(port, server.port()),
            other => panic!("unexpected error: {other}"),
        }
    }
}
