//! Client side of the sidecar wire protocol (see [`super::protocol`]).
//!
//! Over stdio, requests from any number of threads are pipelined on the single
//! child process; a reader thread routes replies back by id, so replies may
//! arrive in any order. Over HTTP each request is one POST.

use super::protocol::{self, Request, Task};
use super::{Backend, BackendError, Detection, ImageKey, ObbDetection};
use crate::imagery::RasterImage;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case")]
pub enum Endpoint {
    /// Spawn `command[0]` with the remaining arguments and talk over its stdin/stdout.
    Stdio { command: Vec<String> },
    Http { url: String },
}

type Reply = Result<Value, BackendError>;
type Pending = Arc<Mutex<HashMap<String, Sender<Reply>>>>;

struct StdioConn {
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    pending: Pending,
}

impl Drop for StdioConn {
    fn drop(&mut self) {
        if let Ok(mut c) = self.child.lock() {
            let _ = c.kill();
            let _ = c.wait();
        }
    }
}

enum Transport {
    Stdio(StdioConn),
    #[cfg(feature = "http")]
    Http { agent: ureq::Agent, url: String },
}

pub struct SidecarClient {
    transport: Transport,
    timeout: Duration,
    next_id: AtomicU64,
    run_tag: String,
}

impl SidecarClient {
    /// Connects and performs the handshake within `timeout`.
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, BackendError> {
        let run_tag = format!("{:x}", std::process::id());
        match endpoint {
            Endpoint::Stdio { command } => Self::spawn(command, timeout, run_tag),
            #[cfg(feature = "http")]
            Endpoint::Http { url } => {
                let agent: ureq::Agent =
                    ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
                let hello = http_post(&agent, url, protocol::HELLO_REQUEST, "hello").map_err(|e| match e {
                    BackendError::Unavailable(_) => e,
                    other => BackendError::Handshake(other.to_string()),
                })?;
                protocol::check_hello(&hello)?;
                Ok(Self {
                    transport: Transport::Http { agent, url: url.clone() },
                    timeout,
                    next_id: AtomicU64::new(0),
                    run_tag,
                })
            }
            #[cfg(not(feature = "http"))]
            Endpoint::Http { .. } => Err(BackendError::Unavailable("http transport disabled in this build".into())),
        }
    }

    fn spawn(command: &[String], timeout: Duration, run_tag: String) -> Result<Self, BackendError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| BackendError::Unavailable("empty sidecar command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Unavailable(format!("cannot spawn `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let pending: Pending = Arc::default();
        let (hello_tx, hello_rx) = mpsc::channel();
        spawn_reader(stdout, pending.clone(), hello_tx);
        let conn = StdioConn { child: Mutex::new(child), stdin: Mutex::new(stdin), pending };
        write_line(&conn, protocol::HELLO_REQUEST).map_err(|e| BackendError::Handshake(e.to_string()))?;
        let hello = match hello_rx.recv_timeout(timeout) {
            Ok(v) => v,
            Err(RecvTimeoutError::Timeout) => {
                return Err(BackendError::Handshake(format!("no handshake reply within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(BackendError::Handshake("sidecar closed its output before the handshake".into()))
            }
        };
        protocol::check_hello(&hello)?;
        Ok(Self { transport: Transport::Stdio(conn), timeout, next_id: AtomicU64::new(0), run_tag })
    }

    fn next_request_id(&self) -> String {
        format!("{}-{}", self.run_tag, self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    /// Sends one request and waits for its reply record.
    pub fn call(&self, task: Task, image: &RasterImage) -> Result<(String, Value), BackendError> {
        let id = self.next_request_id();
        let line = serde_json::to_string(&Request::new(id.clone(), task, image)?).expect("serializable");
        let reply = match &self.transport {
            Transport::Stdio(conn) => {
                let rx = register(conn, &id);
                if let Err(e) = write_line(conn, &line) {
                    conn.pending.lock().expect("pending lock").remove(&id);
                    return Err(BackendError::Unavailable(format!("write to sidecar failed: {e}")));
                }
                wait(conn, &id, rx, self.timeout)?
            }
            #[cfg(feature = "http")]
            Transport::Http { agent, url } => {
                let v = http_post(agent, url, &line, &id)?;
                if protocol::reply_id(&v) != Some(id.as_str()) {
                    return Err(BackendError::Protocol {
                        id: Some(id),
                        message: format!("reply carries id {:?}", protocol::reply_id(&v)),
                    });
                }
                v
            }
        };
        Ok((id, reply))
    }
}

fn register(conn: &StdioConn, id: &str) -> Receiver<Reply> {
    let (tx, rx) = mpsc::channel();
    conn.pending.lock().expect("pending lock").insert(id.to_string(), tx);
    rx
}

fn wait(conn: &StdioConn, id: &str, rx: Receiver<Reply>, timeout: Duration) -> Result<Value, BackendError> {
    match rx.recv_timeout(timeout) {
        Ok(r) => r,
        Err(RecvTimeoutError::Timeout) => {
            conn.pending.lock().expect("pending lock").remove(id);
            Err(BackendError::Timeout { id: id.to_string() })
        }
        Err(RecvTimeoutError::Disconnected) => Err(BackendError::Unavailable("sidecar reader stopped".into())),
    }
}

fn write_line(conn: &StdioConn, line: &str) -> std::io::Result<()> {
    let mut w = conn.stdin.lock().expect("stdin lock");
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()
}

fn spawn_reader(stdout: std::process::ChildStdout, pending: Pending, hello: Sender<Value>) {
    std::thread::Builder::new()
        .name("sidecar-reader".into())
        .spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                route(&line, &pending, &hello);
            }
            let mut p = pending.lock().expect("pending lock");
            for (_, tx) in p.drain() {
                let _ = tx.send(Err(BackendError::Unavailable("sidecar exited".into())));
            }
        })
        .expect("spawn reader thread");
}

fn route(line: &str, pending: &Pending, hello: &Sender<Value>) {
    let parsed: Option<Value> = serde_json::from_str(line).ok();
    match parsed.as_ref().and_then(|v| protocol::reply_id(v).map(|id| (id.to_string(), v))) {
        Some((id, v)) => match pending.lock().expect("pending lock").remove(&id) {
            Some(tx) => {
                let _ = tx.send(Ok(v.clone()));
            }
            None => log::warn!("dropping reply for unknown or expired request {id}"),
        },
        None => {
            if let Some(v) = parsed.as_ref().filter(|v| v.get("hello").is_some()) {
                let _ = hello.send(v.clone());
                return;
            }
            // without an id the record cannot be routed; fail every waiting request
            let snippet: String = line.chars().take(120).collect();
            let mut p = pending.lock().expect("pending lock");
            for (id, tx) in p.drain() {
                let _ = tx.send(Err(BackendError::Protocol {
                    id: Some(id),
                    message: format!("unroutable record `{snippet}`"),
                }));
            }
        }
    }
}

#[cfg(feature = "http")]
fn http_post(agent: &ureq::Agent, url: &str, body: &str, id: &str) -> Result<Value, BackendError> {
    let resp = agent.post(url).header("content-type", "application/json").send(body);
    let mut resp = match resp {
        Ok(r) => r,
        Err(ureq::Error::Timeout(_)) => return Err(BackendError::Timeout { id: id.to_string() }),
        Err(e) => return Err(BackendError::Unavailable(e.to_string())),
    };
    let text = match resp.body_mut().read_to_string() {
        Ok(t) => t,
        Err(ureq::Error::Timeout(_)) => return Err(BackendError::Timeout { id: id.to_string() }),
        Err(e) => return Err(BackendError::Unavailable(e.to_string())),
    };
    serde_json::from_str(&text).map_err(|e| BackendError::Protocol {
        id: Some(id.to_string()),
        message: format!("reply is not JSON: {e}"),
    })
}

impl Backend for SidecarClient {
    fn locate(&self, _key: &ImageKey, image: &RasterImage) -> Result<Vec<Detection>, BackendError> {
        let (id, v) = self.call(Task::Locate, image)?;
        protocol::parse_locate(&id, &v)
    }

    fn orient(&self, _key: &ImageKey, image: &RasterImage) -> Result<Vec<ObbDetection>, BackendError> {
        let (id, v) = self.call(Task::Orient, image)?;
        protocol::parse_orient(&id, &v)
    }
}
