//! Newline-delimited JSON bridge to out-of-process captioners.
//!
//! Request:  `{"v":1,"t":12,"visible":[{"category":"couch","area":0.3}],"depth_mean":2.1,"activation":5.2}`
//! Response: `{"v":1,"text":"a couch","nouns":["couch"]}` (`nouns` optional)
//!
//! Endpoints are `tcp://host:port` or `exec:<program> [args...]`. A failed
//! exchange (connect error, timeout, malformed or wrong-version reply)
//! drops the connection or child; the next call reconnects.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::Observation;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleEntry {
    pub category: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub v: u32,
    pub t: u64,
    pub visible: Vec<VisibleEntry>,
    pub depth_mean: f64,
    pub activation: f64,
}

impl CaptionRequest {
    pub fn from_observation(obs: &Observation, t: u64) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            t,
            visible: obs.visible.iter().map(|o| VisibleEntry { category: o.category.clone(), area: o.apparent_area }).collect(),
            depth_mean: obs.mean_depth(),
            activation: obs.activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub v: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nouns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Exec(Vec<String>),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(Error::InvalidParameter("empty tcp endpoint".into()));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(Error::InvalidParameter("empty exec endpoint".into()));
            }
            return Ok(Endpoint::Exec(argv));
        }
        Err(Error::InvalidParameter(format!("captioner endpoint must start with tcp:// or exec:, got '{s}'")))
    }
}

enum Connection {
    Tcp { writer: TcpStream, reader: BufReader<TcpStream> },
    Child { child: Child, stdin: ChildStdin, lines: Receiver<std::io::Result<String>> },
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Connection::Child { child, .. } = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Client for one endpoint; confined to the thread running the episode.
pub struct ExternalCaptioner {
    endpoint: Endpoint,
    timeout: Duration,
    connection: Option<Connection>,
}

impl std::fmt::Debug for ExternalCaptioner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalCaptioner").field("endpoint", &self.endpoint).field("timeout", &self.timeout).finish()
    }
}

impl ExternalCaptioner {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        Self { endpoint, timeout, connection: None }
    }

    fn connect(&self) -> Result<Connection> {
        match &self.endpoint {
            Endpoint::Tcp(addr) => {
                let sock = addr
                    .to_socket_addrs()?
                    .next()
                    .ok_or_else(|| Error::Captioner(format!("cannot resolve {addr}")))?;
                let stream = TcpStream::connect_timeout(&sock, self.timeout)?;
                stream.set_read_timeout(Some(self.timeout))?;
                stream.set_write_timeout(Some(self.timeout))?;
                stream.set_nodelay(true)?;
                let reader = BufReader::new(stream.try_clone()?);
                Ok(Connection::Tcp { writer: stream, reader })
            }
            Endpoint::Exec(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()?;
                let stdin = child.stdin.take().ok_or_else(|| Error::Captioner("child stdin unavailable".into()))?;
                let stdout = child.stdout.take().ok_or_else(|| Error::Captioner("child stdout unavailable".into()))?;
                let (tx, rx) = mpsc::channel();
                thread::spawn(move || {
                    for line in BufReader::new(stdout).lines() {
                        if tx.send(line).is_err() {
                            break;
                        }
                    }
                });
                Ok(Connection::Child { child, stdin, lines: rx })
            }
        }
    }

    fn exchange(&mut self, request: &CaptionRequest) -> Result<CaptionResponse> {
        if self.connection.is_none() {
            self.connection = Some(self.connect()?);
        }
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        let timeout = self.timeout;
        let reply = match self.connection.as_mut().expect("connected above") {
            Connection::Tcp { writer, reader } => {
                writer.write_all(line.as_bytes())?;
                writer.flush()?;
                let mut buf = String::new();
                if reader.read_line(&mut buf)? == 0 {
                    return Err(Error::Captioner("connection closed".into()));
                }
                buf
            }
            Connection::Child { stdin, lines, .. } => {
                stdin.write_all(line.as_bytes())?;
                stdin.flush()?;
                match lines.recv_timeout(timeout) {
                    Ok(l) => l?,
                    Err(mpsc::RecvTimeoutError::Timeout) => return Err(Error::Captioner("timed out".into())),
                    Err(mpsc::RecvTimeoutError::Disconnected) => return Err(Error::Captioner("captioner exited".into())),
                }
            }
        };
        let response: CaptionResponse =
            serde_json::from_str(reply.trim()).map_err(|e| Error::Captioner(format!("malformed response: {e}")))?;
        if response.v != PROTOCOL_VERSION {
            return Err(Error::Captioner(format!("unsupported protocol version {}", response.v)));
        }
        if response.text.trim().is_empty() {
            return Err(Error::Captioner("empty caption text".into()));
        }
        Ok(response)
    }

    /// One request/response round trip. On failure the connection is
    /// dropped and the error returned for the caller's fallback.
    pub fn request(&mut self, request: &CaptionRequest) -> Result<CaptionResponse> {
        let result = self.exchange(request);
        if result.is_err() {
            self.connection = None;
        }
        result
    }
}
