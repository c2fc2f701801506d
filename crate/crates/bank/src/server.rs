//! The policy server: accepts one connection at a time and executes policies
//! over the wire protocol.
//!
//! All policies are loaded at startup. Within a session, commands are read by
//! a dedicated thread so they are seen mid-motion: a new `execute` while one
//! is running preempts it (the preempted request is answered with
//! `done{success:false}` and the world keeps its partial state), and `cancel`
//! stops the named execute the same way.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::mpsc::{channel, TryRecvError};
use std::thread;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{default_policies, ActiveExecution, PolicySpec};
use crate::proto::{read_message, write_message, ProtoError, Request, Response};
use crate::world::WorldState;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub seed: u64,
    /// Pause between streamed frames; zero streams as fast as the client
    /// reads.
    pub frame_interval_ms: u64,
    /// Stationary frames at the end of each execution, long enough for state
    /// changes to commit downstream.
    pub settle_frames: u32,
    pub world: WorldState,
    pub policies: Vec<PolicySpec>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: 0,
            frame_interval_ms: 0,
            settle_frames: 6,
            world: WorldState::default_scenario(),
            policies: default_policies(),
        }
    }
}

impl WorldConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ServerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed world config: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("bind failed: {0}")]
    Bind(std::io::Error),
}

/// Serves connections sequentially, forever. The world persists across
/// sessions.
pub fn serve(listener: TcpListener, config: WorldConfig) -> Result<(), ServerError> {
    let mut world = config.world.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        log::info!("session from {peer}");
        let reader = match stream.try_clone() {
            Ok(r) => BufReader::new(r),
            Err(e) => {
                log::warn!("clone failed: {e}");
                continue;
            }
        };
        let mut writer = stream;
        if let Err(e) = run_session(&mut world, &config, &mut rng, reader, &mut writer) {
            log::info!("session ended: {e}");
        }
    }
    Ok(())
}

/// Binds an ephemeral local port and serves in a background thread.
pub fn spawn_tcp(config: WorldConfig) -> Result<SocketAddr, ServerError> {
    let listener = TcpListener::bind("127.0.0.1:0").map_err(ServerError::Bind)?;
    let addr = listener.local_addr().map_err(ServerError::Bind)?;
    thread::spawn(move || {
        let _ = serve(listener, config);
    });
    Ok(addr)
}

/// Runs a session over an in-memory duplex pipe in a background thread;
/// returns the client's endpoint. The world is dropped with the session.
pub fn spawn_duplex(
    config: WorldConfig,
) -> (crate::proto::PipeWriter, BufReader<crate::proto::PipeReader>) {
    let ((client_tx, client_rx), (mut server_tx, server_rx)) = crate::proto::duplex();
    thread::spawn(move || {
        let mut world = config.world.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let reader = BufReader::new(server_rx);
        let _ = run_session(&mut world, &config, &mut rng, reader, &mut server_tx);
    });
    (client_tx, BufReader::new(client_rx))
}

enum Command {
    Message(Request),
    Malformed(String),
    Disconnected,
}

/// One client session. Returns when the client disconnects or after a
/// malformed message (which is answered with an error and closes the
/// connection).
pub fn run_session<R, W>(
    world: &mut WorldState,
    config: &WorldConfig,
    rng: &mut ChaCha8Rng,
    reader: R,
    writer: &mut W,
) -> Result<(), ProtoError>
where
    R: BufRead + Send + 'static,
    W: Write,
{
    let (tx, rx) = channel();
    thread::spawn(move || {
        let mut reader = reader;
        loop {
            let command = match read_message::<_, Request>(&mut reader) {
                Ok(message) => Command::Message(message),
                Err(ProtoError::Malformed(e)) => Command::Malformed(e.to_string()),
                Err(_) => Command::Disconnected,
            };
            let stop = matches!(command, Command::Disconnected | Command::Malformed(_));
            if tx.send(command).is_err() || stop {
                return;
            }
        }
    });

    let mut active: Option<ActiveExecution> = None;
    let mut last_execute_id: Option<u64> = None;

    loop {
        // Drain pending commands; block only when idle.
        loop {
            let command = if active.is_some() {
                match rx.try_recv() {
                    Ok(c) => c,
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => Command::Disconnected,
                }
            } else {
                match rx.recv() {
                    Ok(c) => c,
                    Err(_) => Command::Disconnected,
                }
            };
            match command {
                Command::Disconnected => return Ok(()),
                Command::Malformed(message) => {
                    let _ = write_message(writer, &Response::Error { message });
                    return Ok(());
                }
                Command::Message(Request::ListPolicies) => {
                    let names = config.policies.iter().map(|p| p.name.clone()).collect();
                    write_message(writer, &Response::Policies { names })?;
                }
                Command::Message(Request::Cancel { request_id }) => match &active {
                    Some(exec) if exec.request_id == request_id => {
                        write_message(writer, &Response::Done { request_id, success: false })?;
                        active = None;
                    }
                    _ => {
                        write_message(
                            writer,
                            &Response::Error {
                                message: format!("no running execution with request_id {request_id}"),
                            },
                        )?;
                    }
                },
                Command::Message(Request::Execute { policy, request_id }) => {
                    if last_execute_id.is_some_and(|last| request_id <= last) {
                        write_message(
                            writer,
                            &Response::Error {
                                message: format!(
                                    "request_id {request_id} not greater than previous {}",
                                    last_execute_id.unwrap()
                                ),
                            },
                        )?;
                        continue;
                    }
                    let Some(spec) = config.policies.iter().find(|p| p.name == policy) else {
                        write_message(
                            writer,
                            &Response::Error { message: format!("unknown policy {policy:?}") },
                        )?;
                        continue;
                    };
                    // Preemption: the running policy stops mid-motion and its
                    // request fails; the world keeps its partial state.
                    if let Some(preempted) = active.take() {
                        write_message(
                            writer,
                            &Response::Done { request_id: preempted.request_id, success: false },
                        )?;
                    }
                    last_execute_id = Some(request_id);
                    active =
                        Some(ActiveExecution::begin(spec, world, config.settle_frames, request_id, rng));
                }
            }
        }

        if let Some(exec) = &mut active {
            match exec.step(world, rng) {
                Some(frame) => {
                    write_message(writer, &Response::Frame { frame })?;
                    if config.frame_interval_ms > 0 {
                        thread::sleep(Duration::from_millis(config.frame_interval_ms));
                    }
                }
                None => {
                    let response =
                        Response::Done { request_id: exec.request_id, success: exec.succeeded() };
                    active = None;
                    write_message(writer, &response)?;
                }
            }
        }
    }
}
