//! The lockstep cellular-automaton core.
//!
//! A tick runs these sub-phases in order:
//!
//! 1. apply commands (latch lock operations),
//! 2. advance every lock,
//! 3. propose one move per boat from its cell's routing row,
//! 4. resolve contention by boat-id priority against start-of-tick occupancy,
//! 5. commit the granted moves,
//! 6. economy (spawning, dwell, exchange, scores),
//! 7. advance the tick counter.
//!
//! Sub-phases 2-4 only read start-of-tick occupancy, so the result equals a
//! simultaneous update of every cell. No boat can enter a slot vacated in the
//! same tick, which rules out chain moves and swaps.

mod lock;
mod moves;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use lock::{advance_lock, LockDemand, LockPhase, LockRuntime};
pub use moves::{
    apply_moves, free_slots, gate_allows, propose_moves, resolve_conflicts,
    resolve_conflicts_with, routed_next, usable_slots, Intent,
};

use crate::economy::{apply_economy, CargoLedger, DockRuntime, ResourceKind, ScoreEvent};
use crate::hash::Fnv1a;
use crate::hex::HexCoord;
use crate::topology::{CellId, World};

/// Slot value for "no boat".
pub const EMPTY_SLOT: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boat {
    pub boat_id: u32,
    pub area_id: u8,
    pub home_class: u32,
    pub delivery_class: u32,
    pub target_class: u32,
    pub cargo: Option<ResourceKind>,
    /// Current cell; mirrors the slot arrays.
    pub cell: CellId,
    /// Consecutive ticks this boat wanted to move and could not.
    pub stalled: u32,
}

impl Boat {
    pub fn cargo_units(&self) -> u8 {
        self.cargo.is_some() as u8
    }
}

/// Commands accepted by the simulation. The engine consumes `OperateLock`;
/// the rest are handled by the locus registry and the run loop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    OperateLock { lock_id: u32 },
    CreateLocus { locus_id: u32, q: i32, r: i32, radius: u32, stride: u32 },
    MoveLocus { locus_id: u32, q: i32, r: i32, radius: u32 },
    DestroyLocus { locus_id: u32 },
    /// Target ticks per second; zero means unthrottled.
    SetSpeed { ticks_per_sec: u32 },
    PauseResume { paused: bool },
}

/// The complete dynamic state at one tick.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tick: u64,
    pub rng_seed: u64,
    /// Slots per cell (the world's slot capacity).
    pub capacity: u8,
    /// `capacity` slots per cell in cell-id order; `EMPTY_SLOT` when free.
    pub slots: Vec<u32>,
    /// Boat registry, sorted by id.
    pub boats: Vec<Boat>,
    /// Lock states, aligned with `World::locks` (ascending lock id).
    pub locks: Vec<LockRuntime>,
    /// Dock states, aligned with `World::docks` (ascending class).
    pub docks: Vec<DockRuntime>,
    pub scores: BTreeMap<u8, u64>,
    pub ledger: CargoLedger,
}

impl Frame {
    /// Tick-zero frame: initial boats heading for their home supply dock,
    /// all locks low and open, empty stocks.
    pub fn initial(world: &World, rng_seed: u64) -> Frame {
        let cap = world.slot_capacity();
        let mut slots = vec![EMPTY_SLOT; world.cell_count() * cap as usize];
        let mut boats = Vec::with_capacity(world.initial_boats().len());
        for b in world.initial_boats() {
            let cell = world.cell_at(b.coord).expect("validated boat position");
            let base = cell as usize * cap as usize;
            let slot = slots[base..base + cap as usize]
                .iter()
                .position(|&s| s == EMPTY_SLOT)
                .expect("validated capacity");
            slots[base + slot] = b.boat_id;
            let home = world.dock_by_class(b.home_class).expect("validated home class");
            boats.push(Boat {
                boat_id: b.boat_id,
                area_id: b.area_id,
                home_class: b.home_class,
                delivery_class: home.deliver_to.expect("supply docks resolve deliver_to"),
                target_class: b.home_class,
                cargo: None,
                cell,
                stalled: 0,
            });
        }
        let scores = world.areas().into_iter().map(|a| (a, 0)).collect();
        Frame {
            tick: 0,
            rng_seed,
            capacity: cap,
            slots,
            boats,
            locks: vec![LockRuntime::default(); world.locks().len()],
            docks: vec![DockRuntime::default(); world.docks().len()],
            scores,
            ledger: CargoLedger::default(),
        }
    }

    #[inline]
    pub fn slots_of(&self, cell: CellId) -> &[u32] {
        let cap = self.capacity as usize;
        &self.slots[cell as usize * cap..(cell as usize + 1) * cap]
    }

    #[inline]
    pub fn occupancy(&self, cell: CellId) -> u8 {
        self.slots_of(cell).iter().filter(|&&s| s != EMPTY_SLOT).count() as u8
    }

    pub fn boat_index(&self, boat_id: u32) -> Option<usize> {
        self.boats.binary_search_by_key(&boat_id, |b| b.boat_id).ok()
    }

    pub fn boat(&self, boat_id: u32) -> Option<&Boat> {
        self.boat_index(boat_id).map(|i| &self.boats[i])
    }

    /// Stock plus cargo aboard plus delivered units.
    pub fn cargo_in_system(&self) -> u64 {
        let stock: u64 = self.docks.iter().map(|d| d.stock).sum();
        let aboard: u64 = self.boats.iter().map(|b| b.cargo_units() as u64).sum();
        let delivered: u64 = self.scores.values().sum();
        stock + aboard + delivered
    }

    pub fn max_stall(&self) -> u32 {
        self.boats.iter().map(|b| b.stalled).max().unwrap_or(0)
    }

    /// Canonical digest of the dynamic state.
    pub fn hash(&self, world: &World) -> u64 {
        frame_hash(world, self)
    }
}

/// What a tick produced besides the new frame.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepReport {
    pub moves: usize,
    pub events: Vec<ScoreEvent>,
}

/// Gate-side traffic of every lock, from start-of-tick state.
pub fn lock_demands(world: &World, frame: &Frame) -> Vec<LockDemand> {
    (0..world.locks().len())
        .map(|li| {
            let cells = world.lock_cells(li);
            let mut d = LockDemand::default();
            for &id in frame.slots_of(cells.chamber) {
                if id == EMPTY_SLOT {
                    continue;
                }
                let b = &frame.boats[frame.boat_index(id).expect("registered boat")];
                match routed_next(world, cells.chamber, b.target_class) {
                    Some(c) if c == cells.low_gate => d.inside_low = true,
                    Some(c) if c == cells.high_gate => d.inside_high = true,
                    _ => {}
                }
            }
            for (gate, flag) in [(cells.low_gate, &mut d.waiting_low), (cells.high_gate, &mut d.waiting_high)] {
                *flag = frame.slots_of(gate).iter().any(|&id| {
                    id != EMPTY_SLOT && {
                        let b = &frame.boats[frame.boat_index(id).expect("registered boat")];
                        routed_next(world, gate, b.target_class) == Some(cells.chamber)
                    }
                });
            }
            d
        })
        .collect()
}

/// Stepper with reusable scratch space.
#[derive(Clone, Debug, Default)]
pub struct Engine {
    granted_in: Vec<[u8; 2]>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance `frame` by one tick in place.
    pub fn step(&mut self, world: &World, frame: &mut Frame, commands: &[Command]) -> StepReport {
        if self.granted_in.len() != world.cell_count() {
            self.granted_in = vec![[0, 0]; world.cell_count()];
        }

        // 1. commands
        for cmd in commands {
            if let Command::OperateLock { lock_id } = cmd {
                if let Some(li) = world.lock_index(*lock_id) {
                    frame.locks[li].latched = true;
                }
            }
        }

        // 2. locks
        let demands = lock_demands(world, frame);
        for (li, spec) in world.locks().iter().enumerate() {
            frame.locks[li] = advance_lock(spec, frame.locks[li], demands[li]);
        }

        // 3-4. propose and resolve against start-of-tick occupancy
        let intents = propose_moves(world, frame);
        let granted = resolve_conflicts_with(world, frame, &intents, &mut self.granted_in);

        // Starvation counters: a boat with somewhere to go that did not move.
        {
            let mut g = granted.iter().peekable();
            for b in frame.boats.iter_mut() {
                let moved = g.next_if(|it| it.boat_id == b.boat_id).is_some();
                let wants = routed_next(world, b.cell, b.target_class).is_some();
                b.stalled = if moved || !wants { 0 } else { b.stalled + 1 };
            }
        }

        // 5. commit
        apply_moves(frame, &granted);

        // 6. economy
        let mut events = Vec::new();
        apply_economy(world, frame, &mut events);

        // 7. tick
        frame.tick += 1;
        StepReport { moves: granted.len(), events }
    }
}

/// Advance `frame` by one tick in place.
pub fn step(world: &World, frame: &mut Frame, commands: &[Command]) -> StepReport {
    Engine::new().step(world, frame, commands)
}

/// Functional form of [`step`].
pub fn next_frame(world: &World, frame: &Frame, commands: &[Command]) -> Frame {
    let mut next = frame.clone();
    step(world, &mut next, commands);
    next
}

/// FNV-1a over the canonical byte form: tick; cells in `(q, r)` order with
/// their slot arrays; locks by id; dock stocks and dwell tables by dock
/// coordinate; scores by area; then boats by id (target class and cargo).
pub fn frame_hash(world: &World, frame: &Frame) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(frame.tick);
    for (cell, c) in world.coords().iter().enumerate() {
        h.write_i32(c.q);
        h.write_i32(c.r);
        for &s in frame.slots_of(cell as CellId) {
            h.write_u32(s);
        }
    }
    for (spec, l) in world.locks().iter().zip(&frame.locks) {
        h.write_u32(spec.lock_id);
        h.write_u8(l.phase.code());
        h.write_u32(l.timer);
        h.write_u8(l.latched as u8);
    }
    let mut dock_order: Vec<(HexCoord, usize)> =
        world.docks().iter().enumerate().map(|(i, d)| (d.coord, i)).collect();
    dock_order.sort_unstable();
    for (coord, di) in dock_order {
        h.write_i32(coord.q);
        h.write_i32(coord.r);
        let rt = &frame.docks[di];
        h.write_u64(rt.stock);
        h.write_u32(rt.dwell.len() as u32);
        for (&id, &rem) in &rt.dwell {
            h.write_u32(id);
            h.write_u32(rem);
        }
    }
    for (&area, &score) in &frame.scores {
        h.write_u8(area);
        h.write_u64(score);
    }
    for b in &frame.boats {
        h.write_u32(b.boat_id);
        h.write_u32(b.target_class);
        h.write_u8(b.cargo.map_or(0xFF, ResourceKind::code));
    }
    h.finish()
}
