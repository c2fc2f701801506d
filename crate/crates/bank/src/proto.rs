//! Wire protocol between the orchestrator client and the policy server.
//!
//! Newline-delimited JSON records over a reliable byte stream, one message
//! per line. Client requests:
//!
//! ```json
//! {"type":"list_policies"}
//! {"type":"execute","policy":"pick_knife","request_id":1}
//! {"type":"cancel","request_id":1}
//! ```
//!
//! Server responses:
//!
//! ```json
//! {"type":"policies","names":["pick_knife","..."]}
//! {"type":"frame","frame":{"t":0,"detections":[...]}}
//! {"type":"done","request_id":1,"success":true}
//! {"type":"error","message":"..."}
//! ```
//!
//! Execute request ids strictly increase per connection; `cancel` names the
//! execute it aborts. Every `execute` is answered by exactly one `done` (or
//! one `error`), and no `frame` for a request follows its `done`.

use std::collections::VecDeque;
use std::io::{self, BufRead, Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sceneplan_core::frame::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    ListPolicies,
    Execute { policy: String, request_id: u64 },
    Cancel { request_id: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Policies { names: Vec<String> },
    Frame { frame: Frame },
    Done { request_id: u64, success: bool },
    Error { message: String },
}

#[derive(Debug, Error)]
pub enum ProtoError {
    #[error("connection closed")]
    Closed,
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("transport: {0}")]
    Io(#[from] io::Error),
}

pub fn write_message<W: Write, M: Serialize>(writer: &mut W, message: &M) -> Result<(), ProtoError> {
    let mut line = serde_json::to_string(message)?;
    line.push('\n');
    writer.write_all(line.as_bytes())?;
    writer.flush()?;
    Ok(())
}

pub fn read_message<R: BufRead, M: for<'de> Deserialize<'de>>(
    reader: &mut R,
) -> Result<M, ProtoError> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(ProtoError::Closed);
        }
        if !line.trim().is_empty() {
            return Ok(serde_json::from_str(line.trim())?);
        }
    }
}

// ---------------------------------------------------------------------------
// In-memory duplex transport
// ---------------------------------------------------------------------------

/// Write half of an in-memory byte pipe.
pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

impl Write for PipeWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Read half of an in-memory byte pipe; reads block until data or EOF.
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                Err(_) => return Ok(0), // peer dropped: EOF
            }
        }
        let n = out.len().min(self.buf.len());
        for slot in out.iter_mut().take(n) {
            *slot = self.buf.pop_front().unwrap();
        }
        Ok(n)
    }
}

pub fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = channel();
    (PipeWriter { tx }, PipeReader { rx, buf: VecDeque::new() })
}

/// A bidirectional in-memory connection: returns the two endpoints, each a
/// (writer, reader) pair.
pub fn duplex() -> ((PipeWriter, PipeReader), (PipeWriter, PipeReader)) {
    let (a_tx, b_rx) = pipe();
    let (b_tx, a_rx) = pipe();
    ((a_tx, a_rx), (b_tx, b_rx))
}
