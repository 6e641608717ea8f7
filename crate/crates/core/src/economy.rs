//! Supply spawning, dock dwell and cargo exchange, and per-area scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Boat, Frame};
use crate::hex::HexCoord;
use crate::topology::{DockRole, DockSpec, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Coal,
    Grain,
}

impl ResourceKind {
    pub fn code(self) -> u8 {
        match self {
            ResourceKind::Coal => 0,
            ResourceKind::Grain => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<ResourceKind> {
        match code {
            0 => Some(ResourceKind::Coal),
            1 => Some(ResourceKind::Grain),
            _ => None,
        }
    }
}

/// Dynamic state of one dock.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DockRuntime {
    pub stock: u64,
    /// Remaining dwell ticks per boat currently trading here.
    pub dwell: BTreeMap<u32, u32>,
}

/// A completed delivery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoreEvent {
    pub tick: u64,
    pub area_id: u8,
    pub coord: HexCoord,
    pub new_total: u64,
}

/// Running totals for the cargo conservation check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CargoLedger {
    pub spawned: u64,
    pub loaded: u64,
    pub delivered: u64,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based hash of `(seed, tick, coord)`; no state, any evaluation order.
pub fn counter_hash(seed: u64, tick: u64, coord: HexCoord) -> u64 {
    let cell = ((coord.q as u32 as u64) << 32) | coord.r as u32 as u64;
    splitmix(splitmix(splitmix(seed) ^ tick) ^ cell)
}

/// Units a supply dock produces at `tick`: 1 with probability `spawn_rate`.
pub fn spawn_supply(dock: &DockSpec, tick: u64, seed: u64) -> u64 {
    if dock.role != DockRole::Supply || dock.spawn_rate <= 0.0 {
        return 0;
    }
    // 53 uniform bits in [0, 1).
    let u = (counter_hash(seed, tick, dock.coord) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (u < dock.spawn_rate) as u64
}

/// What happened to a boat at its target dock this tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exchange {
    /// Dwell running (or just started).
    Dwelling,
    Loaded,
    Delivered,
    /// Dwell expired with nothing to trade; dwell restarts.
    Waiting,
}

/// Advance one boat's dwell at the dock it is targeting, trading on expiry.
/// The caller is responsible for scores.
pub fn dock_exchange(
    boat: &mut Boat,
    dock: &DockSpec,
    runtime: &mut DockRuntime,
    load_ticks: u32,
) -> Exchange {
    debug_assert_eq!(boat.target_class, dock.dock_class);
    let remaining = match runtime.dwell.get_mut(&boat.boat_id) {
        None => {
            runtime.dwell.insert(boat.boat_id, load_ticks);
            return Exchange::Dwelling;
        }
        Some(r) => {
            *r -= 1;
            *r
        }
    };
    if remaining > 0 {
        return Exchange::Dwelling;
    }
    let outcome = match dock.role {
        DockRole::Supply if boat.cargo.is_none() && runtime.stock >= 1 => {
            runtime.stock -= 1;
            boat.cargo = Some(dock.resource);
            boat.target_class = boat.delivery_class;
            Exchange::Loaded
        }
        DockRole::Delivery if boat.cargo.is_some() => {
            boat.cargo = None;
            boat.target_class = boat.home_class;
            Exchange::Delivered
        }
        _ => Exchange::Waiting,
    };
    if outcome == Exchange::Waiting {
        runtime.dwell.insert(boat.boat_id, load_ticks);
    } else {
        runtime.dwell.remove(&boat.boat_id);
    }
    outcome
}

/// Economy sub-phase of a tick: spawn at supply docks, then run exchanges for
/// boats sitting at their target dock, in ascending boat id across the world.
pub(crate) fn apply_economy(world: &World, frame: &mut Frame, events: &mut Vec<ScoreEvent>) {
    let tick = frame.tick;
    for (di, dock) in world.docks().iter().enumerate() {
        let units = spawn_supply(dock, tick, frame.rng_seed);
        frame.docks[di].stock += units;
        frame.ledger.spawned += units;
    }
    for bi in 0..frame.boats.len() {
        let Some(di) = world.dock_at(frame.boats[bi].cell) else {
            continue;
        };
        let dock = &world.docks()[di];
        if frame.boats[bi].target_class != dock.dock_class {
            continue;
        }
        let outcome =
            dock_exchange(&mut frame.boats[bi], dock, &mut frame.docks[di], world.load_ticks());
        match outcome {
            Exchange::Loaded => frame.ledger.loaded += 1,
            Exchange::Delivered => {
                frame.ledger.delivered += 1;
                let total = frame.scores.entry(dock.area_id).or_insert(0);
                *total += 1;
                events.push(ScoreEvent {
                    tick: tick + 1,
                    area_id: dock.area_id,
                    coord: dock.coord,
                    new_total: *total,
                });
            }
            Exchange::Dwelling | Exchange::Waiting => {}
        }
    }
}
