//! Minimal blocking TCP client, mostly for tests and scripting.

use std::io::{self, ErrorKind, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use crate::codec::{encode, DecodeError, FrameReader, Message, WorldMeta, VERSION};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("connection closed")]
    Closed,
    #[error("timed out")]
    Timeout,
    #[error("unexpected reply {0:?}")]
    Unexpected(Box<Message>),
}

pub struct Client {
    stream: TcpStream,
    frames: FrameReader,
    next_command: u32,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Client, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { stream, frames: FrameReader::new(), next_command: 1 })
    }

    /// Fresh command id, starting at 1.
    pub fn command_id(&mut self) -> u32 {
        let id = self.next_command;
        self.next_command += 1;
        id
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), ClientError> {
        self.send_raw(&encode(msg))
    }

    pub fn send_raw(&mut self, bytes: &[u8]) -> Result<(), ClientError> {
        self.stream.write_all(bytes)?;
        Ok(())
    }

    /// Next message, waiting at most `timeout`.
    pub fn recv(&mut self, timeout: Duration) -> Result<Message, ClientError> {
        let deadline = Instant::now() + timeout;
        let mut buf = [0u8; 16 * 1024];
        loop {
            if let Some(msg) = self.frames.next_message()? {
                return Ok(msg);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(ClientError::Timeout);
            }
            self.stream.set_read_timeout(Some(left))?;
            match self.stream.read(&mut buf) {
                Ok(0) => return Err(ClientError::Closed),
                Ok(n) => self.frames.push(&buf[..n]),
                Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Skip messages until one satisfies `pred`.
    pub fn recv_until(
        &mut self,
        timeout: Duration,
        mut pred: impl FnMut(&Message) -> bool,
    ) -> Result<Message, ClientError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let msg = self.recv(left)?;
            if pred(&msg) {
                return Ok(msg);
            }
        }
    }

    /// Send HELLO and wait for WORLD_META, skipping streamed traffic.
    pub fn hello(&mut self, name: &str) -> Result<WorldMeta, ClientError> {
        self.send(&Message::Hello { version: VERSION, name: name.into() })?;
        match self.recv_until(Duration::from_secs(5), |m| matches!(m, Message::WorldMeta(_) | Message::Err { .. }))? {
            Message::WorldMeta(meta) => Ok(meta),
            other => Err(ClientError::Unexpected(Box::new(other))),
        }
    }
}
