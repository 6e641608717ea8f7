//! Binary protocol and network server for the narrowboat simulator.
//!
//! Frames are a 12-byte header (`NBCA`, version, type, flags, reserved,
//! payload length) followed by a little-endian payload. The same frames go
//! over raw TCP and, one per binary message, over WebSocket.

pub mod client;
pub mod codec;
pub mod net;
pub mod runtime;

pub use client::{Client, ClientError};
pub use codec::{decode, encode, err_code, msg_type, DecodeError, FrameReader, Message, WorldMeta};
pub use net::{listen_tcp, listen_ws};
pub use runtime::{Runtime, RuntimeHandle, StepOutcome};
