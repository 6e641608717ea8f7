//! WireFrame encoding.
//!
//! ```text
//! "NBCA" | version u8 (=1) | type u8 | flags u8 (=0) | reserved u8 (=0) | length u32 | payload
//! ```
//!
//! All integers are little-endian. Strings are a u16 byte length followed by
//! UTF-8. Coordinates travel as i16 pairs.

use nbca_core::economy::ScoreEvent;
use nbca_core::locus::{LocusDelta, LocusSnapshot};
use nbca_core::HexCoord;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"NBCA";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;
pub const MAX_PAYLOAD: u32 = 1 << 20;

pub mod msg_type {
    pub const HELLO: u8 = 0x01;
    pub const WORLD_META: u8 = 0x02;
    pub const LOCUS_SNAPSHOT: u8 = 0x03;
    pub const LOCUS_DELTA: u8 = 0x04;
    pub const EVENT: u8 = 0x05;
    pub const ACK: u8 = 0x06;
    pub const SCORE_SUMMARY: u8 = 0x07;
    pub const CMD_OPERATE_LOCK: u8 = 0x10;
    pub const CMD_LOCUS_CREATE: u8 = 0x11;
    pub const CMD_LOCUS_MOVE: u8 = 0x12;
    pub const CMD_LOCUS_DESTROY: u8 = 0x13;
    pub const CMD_SET_SPEED: u8 = 0x14;
    pub const CMD_PAUSE_RESUME: u8 = 0x15;
    pub const ERR: u8 = 0x7F;
}

/// ERR codes.
pub mod err_code {
    pub const BAD_VERSION: u16 = 1;
    pub const NOT_HELLO: u16 = 2;
    pub const UNKNOWN_TYPE: u16 = 3;
    pub const UNKNOWN_LOCK: u16 = 4;
    pub const DUPLICATE_LOCUS: u16 = 5;
    pub const UNKNOWN_LOCUS: u16 = 6;
    pub const RADIUS_TOO_LARGE: u16 = 7;
    pub const SLOW_CONSUMER: u16 = 8;
    pub const MALFORMED: u16 = 9;
    pub const BAD_STRIDE: u16 = 10;
    /// A well-formed message the receiver does not accept in this direction.
    pub const UNEXPECTED: u16 = 11;
    pub const BAD_MAGIC: u16 = 12;
    pub const OVERSIZED: u16 = 13;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockInfo {
    pub lock_id: u32,
    pub chamber: HexCoord,
    pub low_gate: HexCoord,
    pub high_gate: HexCoord,
    pub raise_ticks: u32,
    pub lower_ticks: u32,
    pub chamber_capacity: u8,
    pub auto_cycle: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DockInfo {
    pub dock_class: u32,
    pub coord: HexCoord,
    pub area_id: u8,
    /// 0 supply, 1 delivery
    pub role: u8,
    /// 0 coal, 1 grain
    pub resource: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldMeta {
    pub name: String,
    pub slot_capacity: u8,
    pub record_size: u16,
    pub min: HexCoord,
    pub max: HexCoord,
    /// Tick of the frame current when the reply was built.
    pub tick: u64,
    pub world_hash: u64,
    pub locks: Vec<LockInfo>,
    pub docks: Vec<DockInfo>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Hello { version: u8, name: String },
    WorldMeta(WorldMeta),
    Snapshot(LocusSnapshot),
    Delta(LocusDelta),
    Event(ScoreEvent),
    Ack { command_id: u32, effective_tick: u64 },
    ScoreSummary { tick: u64, totals: Vec<(u8, u64)> },
    OperateLock { command_id: u32, lock_id: u32 },
    LocusCreate { command_id: u32, locus_id: u32, center: HexCoord, radius: u16, stride: u32 },
    LocusMove { command_id: u32, locus_id: u32, center: HexCoord, radius: u16 },
    LocusDestroy { command_id: u32, locus_id: u32 },
    /// Zero means unthrottled.
    SetSpeed { command_id: u32, ticks_per_sec: u32 },
    PauseResume { command_id: u32, paused: bool },
    /// `command_id` is zero when the error is not about a command.
    Err { command_id: u32, code: u16, message: String },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Message::Hello { .. } => HELLO,
            Message::WorldMeta(_) => WORLD_META,
            Message::Snapshot(_) => LOCUS_SNAPSHOT,
            Message::Delta(_) => LOCUS_DELTA,
            Message::Event(_) => EVENT,
            Message::Ack { .. } => ACK,
            Message::ScoreSummary { .. } => SCORE_SUMMARY,
            Message::OperateLock { .. } => CMD_OPERATE_LOCK,
            Message::LocusCreate { .. } => CMD_LOCUS_CREATE,
            Message::LocusMove { .. } => CMD_LOCUS_MOVE,
            Message::LocusDestroy { .. } => CMD_LOCUS_DESTROY,
            Message::SetSpeed { .. } => CMD_SET_SPEED,
            Message::PauseResume { .. } => CMD_PAUSE_RESUME,
            Message::Err { .. } => ERR,
        }
    }

    /// Command id of a `CMD_*` message.
    pub fn command_id(&self) -> Option<u32> {
        match *self {
            Message::OperateLock { command_id, .. }
            | Message::LocusCreate { command_id, .. }
            | Message::LocusMove { command_id, .. }
            | Message::LocusDestroy { command_id, .. }
            | Message::SetSpeed { command_id, .. }
            | Message::PauseResume { command_id, .. } => Some(command_id),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    OversizedFrame(u32),
    /// Not an error in a stream: wait for `needed` total bytes.
    #[error("truncated frame, {needed} bytes needed")]
    TruncatedFrame { needed: usize },
    /// The frame is skippable: `consumed` bytes cover it.
    #[error("unknown message type {msg_type:#04x}")]
    UnknownType { msg_type: u8, consumed: usize },
    #[error("malformed {msg_type:#04x} payload: {reason}")]
    Malformed { msg_type: u8, consumed: usize, reason: &'static str },
}

impl DecodeError {
    /// Whether the stream can continue after this error.
    pub fn is_recoverable(&self) -> bool {
        matches!(
            self,
            DecodeError::TruncatedFrame { .. } | DecodeError::UnknownType { .. } | DecodeError::Malformed { .. }
        )
    }
}

// ---------------------------------------------------------------------------
// Encoding

struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn coord(&mut self, c: HexCoord) {
        self.0.extend_from_slice(&(c.q as i16).to_le_bytes());
        self.0.extend_from_slice(&(c.r as i16).to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        let b = s.as_bytes();
        let n = b.len().min(u16::MAX as usize);
        self.u16(n as u16);
        self.0.extend_from_slice(&b[..n]);
    }
}

fn encode_payload(msg: &Message, o: &mut Out) {
    match msg {
        Message::Hello { version, name } => {
            o.u8(*version);
            o.str(name);
        }
        Message::WorldMeta(m) => {
            o.str(&m.name);
            o.u8(m.slot_capacity);
            o.u16(m.record_size);
            o.coord(m.min);
            o.coord(m.max);
            o.u64(m.tick);
            o.u64(m.world_hash);
            o.u16(m.locks.len() as u16);
            for l in &m.locks {
                o.u32(l.lock_id);
                o.coord(l.chamber);
                o.coord(l.low_gate);
                o.coord(l.high_gate);
                o.u32(l.raise_ticks);
                o.u32(l.lower_ticks);
                o.u8(l.chamber_capacity);
                o.u8(l.auto_cycle as u8);
            }
            o.u16(m.docks.len() as u16);
            for d in &m.docks {
                o.u32(d.dock_class);
                o.coord(d.coord);
                o.u8(d.area_id);
                o.u8(d.role);
                o.u8(d.resource);
            }
        }
        Message::Snapshot(s) => {
            o.u64(s.tick);
            o.u32(s.locus_id);
            o.coord(s.center);
            o.u16(s.radius as u16);
            o.u16(s.record_size as u16);
            o.u32((s.records.len() / s.record_size.max(1)) as u32);
            o.0.extend_from_slice(&s.records);
        }
        Message::Delta(d) => {
            o.u64(d.tick);
            o.u64(d.base_tick);
            o.u32(d.locus_id);
            o.u16(d.record_size as u16);
            o.u32((d.records.len() / d.record_size.max(1)) as u32);
            o.0.extend_from_slice(&d.records);
        }
        Message::Event(e) => {
            o.u64(e.tick);
            o.u8(e.area_id);
            o.coord(e.coord);
            o.u64(e.new_total);
        }
        Message::Ack { command_id, effective_tick } => {
            o.u32(*command_id);
            o.u64(*effective_tick);
        }
        Message::ScoreSummary { tick, totals } => {
            o.u64(*tick);
            o.u16(totals.len() as u16);
            for &(area, total) in totals {
                o.u8(area);
                o.u64(total);
            }
        }
        Message::OperateLock { command_id, lock_id } => {
            o.u32(*command_id);
            o.u32(*lock_id);
        }
        Message::LocusCreate { command_id, locus_id, center, radius, stride } => {
            o.u32(*command_id);
            o.u32(*locus_id);
            o.coord(*center);
            o.u16(*radius);
            o.u32(*stride);
        }
        Message::LocusMove { command_id, locus_id, center, radius } => {
            o.u32(*command_id);
            o.u32(*locus_id);
            o.coord(*center);
            o.u16(*radius);
        }
        Message::LocusDestroy { command_id, locus_id } => {
            o.u32(*command_id);
            o.u32(*locus_id);
        }
        Message::SetSpeed { command_id, ticks_per_sec } => {
            o.u32(*command_id);
            o.u32(*ticks_per_sec);
        }
        Message::PauseResume { command_id, paused } => {
            o.u32(*command_id);
            o.u8(*paused as u8);
        }
        Message::Err { command_id, code, message } => {
            o.u32(*command_id);
            o.u16(*code);
            o.str(message);
        }
    }
}

/// Append one frame for `msg` to `buf`.
pub fn encode_into(msg: &Message, buf: &mut Vec<u8>) {
    let start = buf.len();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&[VERSION, msg.msg_type(), 0, 0, 0, 0, 0, 0]);
    let mut o = Out(std::mem::take(buf));
    encode_payload(msg, &mut o);
    *buf = o.0;
    let len = (buf.len() - start - HEADER_LEN) as u32;
    debug_assert!(len <= MAX_PAYLOAD);
    buf[start + 8..start + 12].copy_from_slice(&len.to_le_bytes());
}

pub fn encode(msg: &Message) -> Vec<u8> {
    let mut buf = Vec::new();
    encode_into(msg, &mut buf);
    buf
}

// ---------------------------------------------------------------------------
// Decoding

struct In<'a> {
    b: &'a [u8],
    at: usize,
}

type R<T> = Result<T, &'static str>;

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> R<&'a [u8]> {
        if self.b.len() - self.at < n {
            return Err("payload too short");
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> R<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> R<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> R<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> R<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn coord(&mut self) -> R<HexCoord> {
        let q = i16::from_le_bytes(self.take(2)?.try_into().unwrap());
        let r = i16::from_le_bytes(self.take(2)?.try_into().unwrap());
        Ok(HexCoord::new(q as i32, r as i32))
    }
    fn bool(&mut self) -> R<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err("bad boolean"),
        }
    }
    fn str(&mut self) -> R<String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid UTF-8")
    }
    fn records(&mut self, record_size: usize) -> R<Vec<u8>> {
        if record_size < 8 || (record_size - 8) % 8 != 0 {
            return Err("bad record size");
        }
        let count = self.u32()? as usize;
        let len = count.checked_mul(record_size).ok_or("record count overflow")?;
        Ok(self.take(len)?.to_vec())
    }
}

fn decode_payload(t: u8, p: &mut In<'_>) -> R<Message> {
    use msg_type::*;
    Ok(match t {
        HELLO => Message::Hello { version: p.u8()?, name: p.str()? },
        WORLD_META => {
            let name = p.str()?;
            let slot_capacity = p.u8()?;
            let record_size = p.u16()?;
            let min = p.coord()?;
            let max = p.coord()?;
            let tick = p.u64()?;
            let world_hash = p.u64()?;
            let n = p.u16()?;
            let mut locks = Vec::new();
            for _ in 0..n {
                locks.push(LockInfo {
                    lock_id: p.u32()?,
                    chamber: p.coord()?,
                    low_gate: p.coord()?,
                    high_gate: p.coord()?,
                    raise_ticks: p.u32()?,
                    lower_ticks: p.u32()?,
                    chamber_capacity: p.u8()?,
                    auto_cycle: p.bool()?,
                });
            }
            let n = p.u16()?;
            let mut docks = Vec::new();
            for _ in 0..n {
                docks.push(DockInfo {
                    dock_class: p.u32()?,
                    coord: p.coord()?,
                    area_id: p.u8()?,
                    role: p.u8()?,
                    resource: p.u8()?,
                });
            }
            Message::WorldMeta(WorldMeta {
                name,
                slot_capacity,
                record_size,
                min,
                max,
                tick,
                world_hash,
                locks,
                docks,
            })
        }
        LOCUS_SNAPSHOT => {
            let tick = p.u64()?;
            let locus_id = p.u32()?;
            let center = p.coord()?;
            let radius = p.u16()? as u32;
            let record_size = p.u16()? as usize;
            let records = p.records(record_size)?;
            Message::Snapshot(LocusSnapshot { tick, locus_id, center, radius, record_size, records })
        }
        LOCUS_DELTA => {
            let tick = p.u64()?;
            let base_tick = p.u64()?;
            let locus_id = p.u32()?;
            let record_size = p.u16()? as usize;
            let records = p.records(record_size)?;
            Message::Delta(LocusDelta { tick, base_tick, locus_id, record_size, records })
        }
        EVENT => Message::Event(ScoreEvent {
            tick: p.u64()?,
            area_id: p.u8()?,
            coord: p.coord()?,
            new_total: p.u64()?,
        }),
        ACK => Message::Ack { command_id: p.u32()?, effective_tick: p.u64()? },
        SCORE_SUMMARY => {
            let tick = p.u64()?;
            let n = p.u16()?;
            let mut totals = Vec::with_capacity(n as usize);
            for _ in 0..n {
                totals.push((p.u8()?, p.u64()?));
            }
            Message::ScoreSummary { tick, totals }
        }
        CMD_OPERATE_LOCK => Message::OperateLock { command_id: p.u32()?, lock_id: p.u32()? },
        CMD_LOCUS_CREATE => Message::LocusCreate {
            command_id: p.u32()?,
            locus_id: p.u32()?,
            center: p.coord()?,
            radius: p.u16()?,
            stride: p.u32()?,
        },
        CMD_LOCUS_MOVE => Message::LocusMove {
            command_id: p.u32()?,
            locus_id: p.u32()?,
            center: p.coord()?,
            radius: p.u16()?,
        },
        CMD_LOCUS_DESTROY => Message::LocusDestroy { command_id: p.u32()?, locus_id: p.u32()? },
        CMD_SET_SPEED => Message::SetSpeed { command_id: p.u32()?, ticks_per_sec: p.u32()? },
        CMD_PAUSE_RESUME => Message::PauseResume { command_id: p.u32()?, paused: p.bool()? },
        ERR => Message::Err { command_id: p.u32()?, code: p.u16()?, message: p.str()? },
        _ => unreachable!("type checked by caller"),
    })
}

fn known_type(t: u8) -> bool {
    matches!(t, 0x01..=0x07 | 0x10..=0x15 | 0x7F)
}

/// Decode the first frame of `buf`, returning the message and the bytes it
/// occupied. Never reads past the frame's declared length.
pub fn decode(buf: &[u8]) -> Result<(Message, usize), DecodeError> {
    let avail = buf.len().min(4);
    if buf[..avail] != MAGIC[..avail] {
        return Err(DecodeError::BadMagic);
    }
    if buf.len() < HEADER_LEN {
        if buf.len() > 4 && buf[4] != VERSION {
            return Err(DecodeError::UnsupportedVersion(buf[4]));
        }
        return Err(DecodeError::TruncatedFrame { needed: HEADER_LEN });
    }
    if buf[4] != VERSION {
        return Err(DecodeError::UnsupportedVersion(buf[4]));
    }
    let t = buf[5];
    let len = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(DecodeError::OversizedFrame(len));
    }
    let total = HEADER_LEN + len as usize;
    if buf.len() < total {
        return Err(DecodeError::TruncatedFrame { needed: total });
    }
    if !known_type(t) {
        return Err(DecodeError::UnknownType { msg_type: t, consumed: total });
    }
    let malformed = |reason| DecodeError::Malformed { msg_type: t, consumed: total, reason };
    if buf[6] != 0 || buf[7] != 0 {
        return Err(malformed("nonzero flags"));
    }
    let mut p = In { b: &buf[HEADER_LEN..total], at: 0 };
    let msg = decode_payload(t, &mut p).map_err(malformed)?;
    if p.at != p.b.len() {
        return Err(malformed("trailing bytes"));
    }
    Ok((msg, total))
}

/// Incremental frame splitter for byte streams.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete message. `Ok(None)` means more bytes are needed.
    /// Recoverable errors consume the offending frame; fatal ones leave the
    /// buffer as is and the stream should be dropped.
    pub fn next_message(&mut self) -> Result<Option<Message>, DecodeError> {
        if self.buf.is_empty() {
            return Ok(None);
        }
        match decode(&self.buf) {
            Ok((msg, n)) => {
                self.buf.drain(..n);
                Ok(Some(msg))
            }
            Err(DecodeError::TruncatedFrame { .. }) => Ok(None),
            Err(e @ (DecodeError::UnknownType { consumed, .. } | DecodeError::Malformed { consumed, .. })) => {
                self.buf.drain(..consumed);
                Err(e)
            }
            Err(e) => Err(e),
        }
    }
}
