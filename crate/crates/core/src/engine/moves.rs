//! Propose / resolve / apply for boat movement.
//!
//! Everything here reads slot occupancy as it was at the start of the tick.
//! Lock phases are read after the lock sub-phase has advanced them.

use crate::engine::{Frame, EMPTY_SLOT};
use crate::engine::lock::LockPhase;
use crate::topology::{CellId, Route, World};

/// A boat's wish to move one cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intent {
    pub boat_id: u32,
    pub from: CellId,
    pub to: CellId,
}

/// Whether the lock rules allow a move from `from` to `to` under the current
/// lock phases.
pub fn gate_allows(world: &World, frame: &Frame, from: CellId, to: CellId) -> bool {
    if let Some(li) = world.chamber_lock(to) {
        let cells = world.lock_cells(li);
        let phase = frame.locks[li].phase;
        if !((from == cells.low_gate && phase == LockPhase::LowOpen)
            || (from == cells.high_gate && phase == LockPhase::HighOpen))
        {
            return false;
        }
    }
    if let Some(li) = world.chamber_lock(from) {
        let cells = world.lock_cells(li);
        let phase = frame.locks[li].phase;
        if !((to == cells.low_gate && phase == LockPhase::LowOpen)
            || (to == cells.high_gate && phase == LockPhase::HighOpen))
        {
            return false;
        }
    }
    true
}

/// Next cell a boat's routing points at, or `None` when it is at its target.
#[inline]
pub fn routed_next(world: &World, cell: CellId, target_class: u32) -> Option<CellId> {
    let routing = world.routing();
    let k = routing.class_index(target_class)?;
    match routing.route(cell, k) {
        Route::Here => None,
        Route::Step(d) => Some(world.links(cell)[d as usize]),
    }
}

/// One intent per boat that is not at its target dock and not held by a gate,
/// in ascending boat id.
pub fn propose_moves(world: &World, frame: &Frame) -> Vec<Intent> {
    let mut out = Vec::with_capacity(frame.boats.len());
    for b in &frame.boats {
        let Some(to) = routed_next(world, b.cell, b.target_class) else {
            continue;
        };
        if gate_allows(world, frame, b.cell, to) {
            out.push(Intent { boat_id: b.boat_id, from: b.cell, to });
        }
    }
    out
}

/// Free slots an entrant from `from` may use in `to`, given `free` slots
/// empty at the start of the tick. A lock gate cell keeps one slot clear for
/// boats leaving the chamber; only the chamber side may use it.
#[inline]
pub fn usable_slots(world: &World, from: CellId, to: CellId, free: u8) -> u8 {
    if world.slot_capacity() >= 2 && world.is_gate(to) && world.chamber_lock(from).is_none() {
        free.saturating_sub(1)
    } else {
        free
    }
}

/// Free slots of `cell` at the start of the tick.
#[inline]
pub fn free_slots(world: &World, frame: &Frame, cell: CellId) -> u8 {
    world.cell_capacity(cell) - frame.occupancy(cell)
}

/// Grant intents in ascending boat id: a move is granted when the destination
/// still has a start-of-tick slot after the higher-priority grants. Entrants
/// into a gate cell from outside the chamber are further limited to
/// [`usable_slots`] between them, so one slot stays for the chamber exit.
/// Both limits are nested, so this greedy pass picks the lexicographically
/// smallest-id maximal set of moves.
///
/// `granted_in` is scratch space indexed by cell (all grants, outside
/// grants), all zero on entry and on return.
pub fn resolve_conflicts_with(
    world: &World,
    frame: &Frame,
    intents: &[Intent],
    granted_in: &mut [[u8; 2]],
) -> Vec<Intent> {
    debug_assert!(intents.windows(2).all(|w| w[0].boat_id < w[1].boat_id));
    let mut granted = Vec::with_capacity(intents.len());
    for it in intents {
        let free = free_slots(world, frame, it.to);
        let usable = usable_slots(world, it.from, it.to, free);
        let [all, outside] = &mut granted_in[it.to as usize];
        let restricted = usable < free;
        if *all < free && (!restricted || *outside < usable) {
            *all += 1;
            *outside += restricted as u8;
            granted.push(*it);
        }
    }
    for it in &granted {
        granted_in[it.to as usize] = [0, 0];
    }
    granted
}

pub fn resolve_conflicts(world: &World, frame: &Frame, intents: &[Intent]) -> Vec<Intent> {
    let mut scratch = vec![[0u8; 2]; world.cell_count()];
    resolve_conflicts_with(world, frame, intents, &mut scratch)
}

/// Commit granted moves. Arrivals take the lowest slot that was empty at the
/// start of the tick (inserted before departures are cleared), in ascending
/// boat id.
pub fn apply_moves(frame: &mut Frame, granted: &[Intent]) {
    let cap = frame.capacity as usize;
    for it in granted {
        let base = it.to as usize * cap;
        let slot = frame.slots[base..base + cap]
            .iter()
            .position(|&s| s == EMPTY_SLOT)
            .expect("grant never exceeds start-of-tick free slots");
        frame.slots[base + slot] = it.boat_id;
    }
    for it in granted {
        let base = it.from as usize * cap;
        let slot = frame.slots[base..base + cap]
            .iter()
            .position(|&s| s == it.boat_id)
            .expect("mover sits in its source cell");
        frame.slots[base + slot] = EMPTY_SLOT;
        let bi = frame.boat_index(it.boat_id).expect("registered boat");
        frame.boats[bi].cell = it.to;
    }
}
