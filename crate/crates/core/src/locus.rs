//! Locus-of-visibility extraction.
//!
//! A locus is a hex disk owned by one consumer. Each emission covers only the
//! passable cells of that disk, as fixed-size records, so its size depends on
//! the radius and never on the size of the world.
//!
//! Record layout (little-endian), `8 + 8 * C` bytes, 24 for the default C = 2:
//!
//! ```text
//! q: i16 | r: i16 | kind: u8 | lock_phase: u8 (0xFF unless chamber) | occupancy: u8 | 0u8
//! per slot: boat_id: u32 (0xFFFFFFFF empty) | cargo: u8 | area: u8 | 0u16
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{Frame, EMPTY_SLOT};
use crate::hex::{hex_disk, HexCoord, MAX_RADIUS};
use crate::topology::{CellKind, World};

pub const NO_LOCK_PHASE: u8 = 0xFF;

/// Bytes per cell record for slot capacity `capacity`.
pub const fn record_size(capacity: u8) -> usize {
    8 + 8 * capacity as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Locus {
    pub locus_id: u32,
    pub center: HexCoord,
    pub radius: u32,
    /// Emit on ticks divisible by `stride`.
    pub stride: u32,
}

/// One slot of a decoded record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotRecord {
    pub boat_id: u32,
    pub cargo: u8,
    pub area: u8,
}

/// Decoded form of a cell record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRecord {
    pub coord: HexCoord,
    pub kind: u8,
    pub lock_phase: u8,
    pub occupancy: u8,
    pub slots: Vec<SlotRecord>,
}

impl CellRecord {
    pub fn parse(bytes: &[u8]) -> CellRecord {
        let q = i16::from_le_bytes([bytes[0], bytes[1]]);
        let r = i16::from_le_bytes([bytes[2], bytes[3]]);
        let slots = bytes[8..]
            .chunks_exact(8)
            .map(|s| SlotRecord {
                boat_id: u32::from_le_bytes([s[0], s[1], s[2], s[3]]),
                cargo: s[4],
                area: s[5],
            })
            .collect();
        CellRecord {
            coord: HexCoord::new(q as i32, r as i32),
            kind: bytes[4],
            lock_phase: bytes[5],
            occupancy: bytes[6],
            slots,
        }
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.coord.q as i16).to_le_bytes());
        out.extend_from_slice(&(self.coord.r as i16).to_le_bytes());
        out.extend_from_slice(&[self.kind, self.lock_phase, self.occupancy, 0]);
        for s in &self.slots {
            out.extend_from_slice(&s.boat_id.to_le_bytes());
            out.extend_from_slice(&[s.cargo, s.area, 0, 0]);
        }
    }
}

fn record_coord(rec: &[u8]) -> HexCoord {
    HexCoord::new(
        i16::from_le_bytes([rec[0], rec[1]]) as i32,
        i16::from_le_bytes([rec[2], rec[3]]) as i32,
    )
}

/// Full view of a locus at one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocusSnapshot {
    pub tick: u64,
    pub locus_id: u32,
    pub center: HexCoord,
    pub radius: u32,
    pub record_size: usize,
    /// Concatenated records in `(q, r)` order.
    pub records: Vec<u8>,
}

impl LocusSnapshot {
    pub fn len(&self) -> usize {
        self.records.len() / self.record_size
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, i: usize) -> &[u8] {
        &self.records[i * self.record_size..(i + 1) * self.record_size]
    }

    pub fn iter_records(&self) -> impl Iterator<Item = &[u8]> {
        self.records.chunks_exact(self.record_size)
    }

    pub fn cell_records(&self) -> Vec<CellRecord> {
        self.iter_records().map(CellRecord::parse).collect()
    }

    fn position(&self, coord: HexCoord) -> Option<usize> {
        let n = self.len();
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match record_coord(self.record(mid)).cmp(&coord) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }
}

/// Records that changed between two snapshots of the same geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocusDelta {
    pub tick: u64,
    pub base_tick: u64,
    pub locus_id: u32,
    pub record_size: usize,
    pub records: Vec<u8>,
}

impl LocusDelta {
    pub fn len(&self) -> usize {
        self.records.len() / self.record_size
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter_records(&self) -> impl Iterator<Item = &[u8]> {
        self.records.chunks_exact(self.record_size)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocusError {
    #[error("locus {0} already exists")]
    DuplicateId(u32),
    #[error("no locus {0}")]
    UnknownId(u32),
    #[error("radius {0} exceeds {max}", max = MAX_RADIUS)]
    RadiusTooLarge(u32),
    #[error("stride must be positive")]
    BadStride,
    #[error("snapshots differ in locus or geometry")]
    GeometryMismatch,
    #[error("delta record {0} is not part of the snapshot")]
    UnknownRecord(HexCoord),
}

/// Records for the passable cells of the locus disk.
pub fn extract(frame: &Frame, world: &World, locus: &Locus) -> LocusSnapshot {
    let cap = world.slot_capacity();
    let size = record_size(cap);
    let mut records = Vec::with_capacity(crate::hex::disk_size(locus.radius) * size);
    for coord in hex_disk(locus.center, locus.radius) {
        let Some(cell) = world.cell_at(coord) else {
            continue;
        };
        let kind = world.kind(cell);
        let lock_phase = match (kind, world.chamber_lock(cell)) {
            (CellKind::LockChamber, Some(li)) => frame.locks[li].phase.code(),
            _ => NO_LOCK_PHASE,
        };
        let slots = frame.slots_of(cell);
        records.extend_from_slice(&(coord.q as i16).to_le_bytes());
        records.extend_from_slice(&(coord.r as i16).to_le_bytes());
        let occupancy = slots.iter().filter(|&&s| s != EMPTY_SLOT).count() as u8;
        records.extend_from_slice(&[kind.code(), lock_phase, occupancy, 0]);
        for &id in slots {
            let (cargo, area) = match frame.boat(id) {
                Some(b) if id != EMPTY_SLOT => (b.cargo_units(), b.area_id),
                _ => (0, 0),
            };
            records.extend_from_slice(&id.to_le_bytes());
            records.extend_from_slice(&[cargo, area, 0, 0]);
        }
    }
    LocusSnapshot {
        tick: frame.tick,
        locus_id: locus.locus_id,
        center: locus.center,
        radius: locus.radius,
        record_size: size,
        records,
    }
}

/// Records of `cur` whose bytes differ from `prev`.
pub fn encode_delta(prev: &LocusSnapshot, cur: &LocusSnapshot) -> Result<LocusDelta, LocusError> {
    if prev.locus_id != cur.locus_id
        || prev.center != cur.center
        || prev.radius != cur.radius
        || prev.record_size != cur.record_size
        || prev.records.len() != cur.records.len()
    {
        return Err(LocusError::GeometryMismatch);
    }
    let mut records = Vec::new();
    for (a, b) in prev.iter_records().zip(cur.iter_records()) {
        if a[..4] != b[..4] {
            return Err(LocusError::GeometryMismatch);
        }
        if a != b {
            records.extend_from_slice(b);
        }
    }
    Ok(LocusDelta {
        tick: cur.tick,
        base_tick: prev.tick,
        locus_id: cur.locus_id,
        record_size: cur.record_size,
        records,
    })
}

/// Apply a delta to its base snapshot in place.
pub fn apply_delta(base: &mut LocusSnapshot, delta: &LocusDelta) -> Result<(), LocusError> {
    if base.locus_id != delta.locus_id || base.record_size != delta.record_size {
        return Err(LocusError::GeometryMismatch);
    }
    for rec in delta.iter_records() {
        let coord = record_coord(rec);
        let i = base.position(coord).ok_or(LocusError::UnknownRecord(coord))?;
        let size = base.record_size;
        base.records[i * size..(i + 1) * size].copy_from_slice(rec);
    }
    base.tick = delta.tick;
    Ok(())
}

/// What a locus produces on an emitting tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Emission {
    Snapshot(LocusSnapshot),
    Delta(LocusDelta),
}

#[derive(Clone, Debug)]
struct Entry {
    locus: Locus,
    last: Option<LocusSnapshot>,
}

/// The loci of one consumer.
#[derive(Clone, Debug, Default)]
pub struct LocusRegistry {
    entries: BTreeMap<u32, Entry>,
}

impl LocusRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, locus_id: u32) -> Option<&Locus> {
        self.entries.get(&locus_id).map(|e| &e.locus)
    }

    pub fn loci(&self) -> impl Iterator<Item = &Locus> {
        self.entries.values().map(|e| &e.locus)
    }

    pub fn create(&mut self, locus: Locus) -> Result<(), LocusError> {
        if locus.radius > MAX_RADIUS {
            return Err(LocusError::RadiusTooLarge(locus.radius));
        }
        if locus.stride == 0 {
            return Err(LocusError::BadStride);
        }
        if self.entries.contains_key(&locus.locus_id) {
            return Err(LocusError::DuplicateId(locus.locus_id));
        }
        self.entries.insert(locus.locus_id, Entry { locus, last: None });
        Ok(())
    }

    /// Re-center and resize; the next emission is a full snapshot.
    pub fn relocate(&mut self, locus_id: u32, center: HexCoord, radius: u32) -> Result<(), LocusError> {
        if radius > MAX_RADIUS {
            return Err(LocusError::RadiusTooLarge(radius));
        }
        let e = self.entries.get_mut(&locus_id).ok_or(LocusError::UnknownId(locus_id))?;
        e.locus.center = center;
        e.locus.radius = radius;
        e.last = None;
        Ok(())
    }

    pub fn destroy(&mut self, locus_id: u32) -> Result<Locus, LocusError> {
        self.entries
            .remove(&locus_id)
            .map(|e| e.locus)
            .ok_or(LocusError::UnknownId(locus_id))
    }

    /// Emissions due at `frame.tick`, snapshot for new or moved loci and a
    /// delta otherwise.
    pub fn emit(&mut self, world: &World, frame: &Frame) -> Vec<Emission> {
        let mut out = Vec::new();
        for e in self.entries.values_mut() {
            if frame.tick % e.locus.stride as u64 != 0 {
                continue;
            }
            let snap = extract(frame, world, &e.locus);
            let emission = match e.last.as_ref().map(|prev| encode_delta(prev, &snap)) {
                Some(Ok(delta)) => Emission::Delta(delta),
                _ => Emission::Snapshot(snap.clone()),
            };
            e.last = Some(snap);
            out.push(emission);
        }
        out
    }
}
