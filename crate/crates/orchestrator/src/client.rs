//! Synchronous client for the policy server.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use thiserror::Error;

use sceneplan_bank::proto::{read_message, write_message, ProtoError, Request, Response};
use sceneplan_core::frame::Frame;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] ProtoError),
    #[error("connect to {addr}: {source}")]
    Connect { addr: String, source: std::io::Error },
    #[error("server error: {0}")]
    Server(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("frame ingestion failed: {0}")]
    Ingest(String),
}

/// One connection to the policy server. Requests are strictly sequential;
/// execute request ids increase monotonically.
pub struct BankClient<R, W> {
    reader: R,
    writer: W,
    next_request_id: u64,
}

impl BankClient<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: &str) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr)
            .map_err(|source| ClientError::Connect { addr: addr.to_string(), source })?;
        let reader = BufReader::new(
            stream.try_clone().map_err(|source| ClientError::Connect { addr: addr.into(), source })?,
        );
        Ok(BankClient::from_parts(reader, stream))
    }
}

impl<R: BufRead, W: Write> BankClient<R, W> {
    pub fn from_parts(reader: R, writer: W) -> Self {
        BankClient { reader, writer, next_request_id: 1 }
    }

    pub fn list_policies(&mut self) -> Result<Vec<String>, ClientError> {
        write_message(&mut self.writer, &Request::ListPolicies)?;
        match read_message::<_, Response>(&mut self.reader)? {
            Response::Policies { names } => Ok(names),
            Response::Error { message } => Err(ClientError::Server(message)),
            other => Err(ClientError::Protocol(format!("unexpected response {other:?}"))),
        }
    }

    /// Executes a policy, feeding every streamed frame to `on_frame`;
    /// returns the server's success signal.
    pub fn execute(
        &mut self,
        policy: &str,
        mut on_frame: impl FnMut(Frame) -> Result<(), String>,
    ) -> Result<bool, ClientError> {
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        write_message(
            &mut self.writer,
            &Request::Execute { policy: policy.to_string(), request_id },
        )?;
        loop {
            match read_message::<_, Response>(&mut self.reader)? {
                Response::Frame { frame } => on_frame(frame).map_err(ClientError::Ingest)?,
                Response::Done { request_id: id, success } => {
                    if id != request_id {
                        return Err(ClientError::Protocol(format!(
                            "done for request {id}, expected {request_id}"
                        )));
                    }
                    return Ok(success);
                }
                Response::Error { message } => return Err(ClientError::Server(message)),
                other => return Err(ClientError::Protocol(format!("unexpected response {other:?}"))),
            }
        }
    }

    pub fn cancel(&mut self, request_id: u64) -> Result<(), ClientError> {
        write_message(&mut self.writer, &Request::Cancel { request_id })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sceneplan_bank::{spawn_duplex, WorldConfig};

    #[test]
    fn list_and_execute_against_an_in_memory_server() {
        let mut config = WorldConfig::default();
        for policy in &mut config.policies {
            policy.success_probability = 1.0;
        }
        let (tx, rx) = spawn_duplex(config);
        let mut client = BankClient::from_parts(rx, tx);
        let names = client.list_policies().unwrap();
        assert_eq!(names.len(), 6);
        let mut frames = 0;
        let success = client
            .execute("pick_spoon", |_| {
                frames += 1;
                Ok(())
            })
            .unwrap();
        assert!(success);
        assert_eq!(frames, 30);
    }

    #[test]
    fn unknown_policy_surfaces_the_server_error() {
        let (tx, rx) = spawn_duplex(WorldConfig::default());
        let mut client = BankClient::from_parts(rx, tx);
        let err = client.execute("dance", |_| Ok(())).unwrap_err();
        assert!(matches!(err, ClientError::Server(_)), "{err}");
    }
}
