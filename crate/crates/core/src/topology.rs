//! Static canal worlds: loading, validation and routing compilation.
//!
//! A [`World`] is immutable once built. Every cell present in the file is
//! passable; absent coordinates are bank. Movement adjacency ("links") is the
//! hex neighborhood restricted so that a lock chamber connects only to its two
//! gate cells.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::economy::ResourceKind;
use crate::hash::Fnv1a;
use crate::hex::HexCoord;

/// Dense index of a cell inside a [`World`], in `(q, r)` order.
pub type CellId = u32;

/// Marker for "no link in this direction".
pub const NO_LINK: CellId = CellId::MAX;

/// Routing entry meaning "this cell is the destination".
pub const ROUTE_HERE: u8 = 0xFE;
const ROUTE_UNSET: u8 = 0xFF;

pub const DEFAULT_SLOT_CAPACITY: u8 = 2;
pub const DEFAULT_LOAD_TICKS: u32 = 2;
pub const MAX_SLOT_CAPACITY: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Channel,
    Junction,
    LockChamber,
    SupplyDock,
    DeliveryDock,
}

impl CellKind {
    /// Wire code of this kind.
    pub fn code(self) -> u8 {
        match self {
            CellKind::Channel => 0,
            CellKind::Junction => 1,
            CellKind::LockChamber => 2,
            CellKind::SupplyDock => 3,
            CellKind::DeliveryDock => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<CellKind> {
        Some(match code {
            0 => CellKind::Channel,
            1 => CellKind::Junction,
            2 => CellKind::LockChamber,
            3 => CellKind::SupplyDock,
            4 => CellKind::DeliveryDock,
            _ => return None,
        })
    }

    pub fn is_dock(self) -> bool {
        matches!(self, CellKind::SupplyDock | CellKind::DeliveryDock)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DockRole {
    Supply,
    Delivery,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockSpec {
    pub lock_id: u32,
    pub chamber: HexCoord,
    pub low_gate: HexCoord,
    pub high_gate: HexCoord,
    pub raise_ticks: u32,
    pub lower_ticks: u32,
    pub chamber_capacity: u8,
    /// Self-operate for unattended runs.
    pub auto_cycle: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DockSpec {
    pub coord: HexCoord,
    pub area_id: u8,
    pub dock_class: u32,
    pub role: DockRole,
    pub resource: ResourceKind,
    /// Expected cargo units per tick (supply docks only).
    pub spawn_rate: f64,
    /// Delivery class that cargo loaded here is bound for. Always set for
    /// supply docks after loading, always `None` for delivery docks.
    pub deliver_to: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoatInit {
    pub boat_id: u32,
    pub coord: HexCoord,
    pub area_id: u8,
    /// Home supply dock class.
    pub home_class: u32,
}

// ---------------------------------------------------------------------------
// File format

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub name: String,
    pub slot_capacity: u32,
    #[serde(default = "default_load_ticks")]
    pub load_ticks: u32,
    pub cells: Vec<CellEntry>,
    #[serde(default)]
    pub locks: Vec<LockEntry>,
    #[serde(default)]
    pub docks: Vec<DockEntry>,
    #[serde(default)]
    pub boats: Vec<BoatEntry>,
}

fn default_load_ticks() -> u32 {
    DEFAULT_LOAD_TICKS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub q: i32,
    pub r: i32,
    pub kind: CellKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockEntry {
    pub lock_id: u32,
    pub chamber: [i32; 2],
    pub low_gate: [i32; 2],
    pub high_gate: [i32; 2],
    pub raise_ticks: u32,
    pub lower_ticks: u32,
    pub chamber_capacity: u32,
    #[serde(default)]
    pub auto_cycle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DockEntry {
    pub coord: [i32; 2],
    pub area_id: u32,
    pub dock_class: u32,
    pub role: DockRole,
    pub resource: ResourceKind,
    #[serde(default)]
    pub spawn_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deliver_to: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoatEntry {
    pub id: u32,
    pub q: i32,
    pub r: i32,
    pub area: u32,
    pub class: u32,
}

fn pair(c: [i32; 2]) -> HexCoord {
    HexCoord::new(c[0], c[1])
}

fn unpair(c: HexCoord) -> [i32; 2] {
    [c.q, c.r]
}

// ---------------------------------------------------------------------------
// Errors

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("world has no cells")]
    Empty,
    #[error("slot_capacity {0} outside 1..={max}", max = MAX_SLOT_CAPACITY)]
    SlotCapacity(u32),
    #[error("load_ticks must be positive")]
    LoadTicks,
    #[error("duplicate cell {0}")]
    DuplicateCoord(HexCoord),
    #[error("coordinate {0} outside the 16-bit range")]
    CoordOutOfRange(HexCoord),
    #[error("{what} refers to {coord}, which is not a cell")]
    NotACell { what: String, coord: HexCoord },
    #[error("duplicate lock_id {0}")]
    DuplicateLockId(u32),
    #[error("lock {lock_id}: chamber {coord} is not a lock_chamber cell")]
    ChamberKind { lock_id: u32, coord: HexCoord },
    #[error("lock {lock_id}: gate {gate} is not adjacent to chamber")]
    GateNotAdjacent { lock_id: u32, gate: HexCoord },
    #[error("lock {lock_id}: low and high gate coincide")]
    GatesCoincide { lock_id: u32 },
    #[error("lock {lock_id}: gate {gate} must be a channel, junction or dock")]
    GateKind { lock_id: u32, gate: HexCoord },
    #[error("lock {lock_id}: raise_ticks and lower_ticks must be positive")]
    LockTicks { lock_id: u32 },
    #[error("lock {lock_id}: chamber_capacity {capacity} outside 1..=slot_capacity")]
    ChamberCapacity { lock_id: u32, capacity: u32 },
    #[error("chamber {0} has no lock, or more than one")]
    ChamberLockCount(HexCoord),
    #[error("duplicate dock_class {0}")]
    DuplicateDockClass(u32),
    #[error("dock {coord}: cell kind does not match role")]
    DockKind { coord: HexCoord },
    #[error("dock cell {0} has no dock entry, or more than one")]
    DockCount(HexCoord),
    #[error("dock class {class}: area_id {area} exceeds 255")]
    DockArea { class: u32, area: u32 },
    #[error("dock class {0}: spawn_rate must be in [0, 1] and zero for delivery docks")]
    SpawnRate(u32),
    #[error("supply dock class {0}: no delivery class to deliver to")]
    NoDelivery(u32),
    #[error("dock class {class}: deliver_to {target} is not a delivery dock")]
    BadDeliverTo { class: u32, target: u32 },
    #[error("delivery dock class {0} has deliver_to set")]
    DeliverToOnDelivery(u32),
    #[error("duplicate boat id {0}")]
    DuplicateBoatId(u32),
    #[error("boat id {0} is reserved for empty slots")]
    ReservedBoatId(u32),
    #[error("boat {boat_id}: area {area} exceeds 255")]
    BoatArea { boat_id: u32, area: u32 },
    #[error("boat {boat_id}: home class {class} is not a supply dock")]
    BoatHome { boat_id: u32, class: u32 },
    #[error("cell {coord} holds {count} boats, capacity {capacity}")]
    CellOverCapacity { coord: HexCoord, count: usize, capacity: usize },
    #[error("cell {0} is not connected to the rest of the canal")]
    Disconnected(HexCoord),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no route for {} (cell, class) pairs, first: {:?}", .pairs.len(), .pairs.first())]
pub struct UnreachableError {
    pub pairs: Vec<(HexCoord, u32)>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("malformed world file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid world: {0}")]
    Validation(#[from] ValidationError),
    #[error("routing: {0}")]
    Unreachable(#[from] UnreachableError),
}

// ---------------------------------------------------------------------------
// Routing

/// Per-cell next-hop table for every dock class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTable {
    classes: Vec<u32>,
    dirs: Vec<u8>,
}

/// Next hop for a boat heading to some class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Here,
    Step(u8),
}

impl RoutingTable {
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn class_index(&self, class: u32) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }

    #[inline]
    pub fn route(&self, cell: CellId, class_idx: usize) -> Route {
        match self.dirs[cell as usize * self.classes.len() + class_idx] {
            ROUTE_HERE => Route::Here,
            d => Route::Step(d),
        }
    }
}

/// The static part of the world needed to compile routing.
#[derive(Clone, Debug)]
pub struct Layout<'a> {
    pub coords: &'a [HexCoord],
    pub links: &'a [[CellId; 6]],
    /// `(dock_class, dock cell)` pairs.
    pub targets: &'a [(u32, CellId)],
}

/// Breadth-first hop distances to `target` over the link graph.
pub(crate) fn distances_to(links: &[[CellId; 6]], target: CellId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; links.len()];
    let mut queue = VecDeque::new();
    dist[target as usize] = 0;
    queue.push_back(target);
    while let Some(c) = queue.pop_front() {
        let d = dist[c as usize];
        // Links are symmetric, so outgoing links of `c` are incoming ones too.
        for &n in &links[c as usize] {
            if n != NO_LINK && dist[n as usize] == u32::MAX {
                dist[n as usize] = d + 1;
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Compile per-cell routing: each entry points along a shortest path (every
/// link costs one hop, locks included) with ties going to the smallest
/// direction index.
pub fn compile_routing(layout: &Layout<'_>) -> Result<RoutingTable, UnreachableError> {
    let mut targets = layout.targets.to_vec();
    targets.sort_unstable();
    let classes: Vec<u32> = targets.iter().map(|t| t.0).collect();
    let n = layout.links.len();
    let k = classes.len();
    let mut dirs = vec![ROUTE_UNSET; n * k];
    let mut missing = Vec::new();
    for (ci, &(class, target)) in targets.iter().enumerate() {
        let dist = distances_to(layout.links, target);
        for cell in 0..n {
            let slot = &mut dirs[cell * k + ci];
            if cell == target as usize {
                *slot = ROUTE_HERE;
                continue;
            }
            let d = dist[cell];
            if d == u32::MAX {
                missing.push((layout.coords[cell], class));
                continue;
            }
            let dir = layout.links[cell]
                .iter()
                .position(|&nb| nb != NO_LINK && dist[nb as usize] + 1 == d)
                .expect("a finite distance has a predecessor");
            *slot = dir as u8;
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(UnreachableError { pairs: missing });
    }
    Ok(RoutingTable { classes, dirs })
}

// ---------------------------------------------------------------------------
// World

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    name: String,
    slot_capacity: u8,
    load_ticks: u32,
    coords: Vec<HexCoord>,
    kinds: Vec<CellKind>,
    index: HashMap<HexCoord, CellId>,
    links: Vec<[CellId; 6]>,
    locks: Vec<LockSpec>,
    lock_cells: Vec<LockCells>,
    /// Lock index owning each chamber cell.
    chamber_of: Vec<Option<u16>>,
    gate_cell: Vec<bool>,
    docks: Vec<DockSpec>,
    dock_cells: Vec<CellId>,
    dock_at: Vec<Option<u16>>,
    boats: Vec<BoatInit>,
    routing: RoutingTable,
}

/// Cell ids of a lock's three cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LockCells {
    pub chamber: CellId,
    pub low_gate: CellId,
    pub high_gate: CellId,
}

impl World {
    pub fn from_json(text: &str) -> Result<World, LoadError> {
        let file: WorldFile = serde_json::from_str(text)?;
        World::from_file(file)
    }

    pub fn from_file(file: WorldFile) -> Result<World, LoadError> {
        let mut world = World::validate(file)?;
        let targets: Vec<(u32, CellId)> = world
            .docks
            .iter()
            .zip(&world.dock_cells)
            .map(|(d, &c)| (d.dock_class, c))
            .collect();
        world.routing = compile_routing(&Layout {
            coords: &world.coords,
            links: &world.links,
            targets: &targets,
        })?;
        Ok(world)
    }

    fn validate(file: WorldFile) -> Result<World, ValidationError> {
        use ValidationError as E;
        if file.cells.is_empty() {
            return Err(E::Empty);
        }
        if file.slot_capacity == 0 || file.slot_capacity > MAX_SLOT_CAPACITY as u32 {
            return Err(E::SlotCapacity(file.slot_capacity));
        }
        if file.load_ticks == 0 {
            return Err(E::LoadTicks);
        }
        let slot_capacity = file.slot_capacity as u8;

        let mut cells: BTreeMap<HexCoord, CellKind> = BTreeMap::new();
        for c in &file.cells {
            let coord = HexCoord::new(c.q, c.r);
            if !coord.fits_i16() {
                return Err(E::CoordOutOfRange(coord));
            }
            if cells.insert(coord, c.kind).is_some() {
                return Err(E::DuplicateCoord(coord));
            }
        }
        let coords: Vec<HexCoord> = cells.keys().copied().collect();
        let kinds: Vec<CellKind> = cells.values().copied().collect();
        let index: HashMap<HexCoord, CellId> =
            coords.iter().enumerate().map(|(i, &c)| (c, i as CellId)).collect();
        let lookup = |what: &str, coord: HexCoord| {
            index.get(&coord).copied().ok_or_else(|| E::NotACell {
                what: what.to_string(),
                coord,
            })
        };

        // Locks
        let mut locks: Vec<LockSpec> = Vec::with_capacity(file.locks.len());
        for l in &file.locks {
            let spec = LockSpec {
                lock_id: l.lock_id,
                chamber: pair(l.chamber),
                low_gate: pair(l.low_gate),
                high_gate: pair(l.high_gate),
                raise_ticks: l.raise_ticks,
                lower_ticks: l.lower_ticks,
                chamber_capacity: 0,
                auto_cycle: l.auto_cycle,
            };
            let what = format!("lock {}", l.lock_id);
            let chamber = lookup(&what, spec.chamber)?;
            if kinds[chamber as usize] != CellKind::LockChamber {
                return Err(E::ChamberKind { lock_id: l.lock_id, coord: spec.chamber });
            }
            if spec.low_gate == spec.high_gate {
                return Err(E::GatesCoincide { lock_id: l.lock_id });
            }
            for gate in [spec.low_gate, spec.high_gate] {
                if spec.chamber.direction_to(gate).is_none() {
                    return Err(E::GateNotAdjacent { lock_id: l.lock_id, gate });
                }
                let g = lookup(&what, gate)?;
                if kinds[g as usize] == CellKind::LockChamber {
                    return Err(E::GateKind { lock_id: l.lock_id, gate });
                }
            }
            if l.raise_ticks == 0 || l.lower_ticks == 0 {
                return Err(E::LockTicks { lock_id: l.lock_id });
            }
            if l.chamber_capacity == 0 || l.chamber_capacity > slot_capacity as u32 {
                return Err(E::ChamberCapacity {
                    lock_id: l.lock_id,
                    capacity: l.chamber_capacity,
                });
            }
            locks.push(LockSpec {
                chamber_capacity: l.chamber_capacity as u8,
                ..spec
            });
        }
        locks.sort_by_key(|l| l.lock_id);
        if let Some(w) = locks.windows(2).find(|w| w[0].lock_id == w[1].lock_id) {
            return Err(E::DuplicateLockId(w[0].lock_id));
        }
        let mut chamber_of: Vec<Option<u16>> = vec![None; coords.len()];
        let mut gate_cell = vec![false; coords.len()];
        let mut lock_cells = Vec::with_capacity(locks.len());
        for (li, l) in locks.iter().enumerate() {
            let cells = LockCells {
                chamber: index[&l.chamber],
                low_gate: index[&l.low_gate],
                high_gate: index[&l.high_gate],
            };
            let slot = &mut chamber_of[cells.chamber as usize];
            if slot.is_some() {
                return Err(E::ChamberLockCount(l.chamber));
            }
            *slot = Some(li as u16);
            gate_cell[cells.low_gate as usize] = true;
            gate_cell[cells.high_gate as usize] = true;
            lock_cells.push(cells);
        }
        for (i, k) in kinds.iter().enumerate() {
            if *k == CellKind::LockChamber && chamber_of[i].is_none() {
                return Err(E::ChamberLockCount(coords[i]));
            }
        }

        // Docks
        let mut docks: Vec<DockSpec> = Vec::with_capacity(file.docks.len());
        let mut dock_at: Vec<Option<u16>> = vec![None; coords.len()];
        for d in &file.docks {
            let coord = pair(d.coord);
            let cell = lookup(&format!("dock class {}", d.dock_class), coord)?;
            let want = match d.role {
                DockRole::Supply => CellKind::SupplyDock,
                DockRole::Delivery => CellKind::DeliveryDock,
            };
            if kinds[cell as usize] != want {
                return Err(E::DockKind { coord });
            }
            if d.area_id > u8::MAX as u32 {
                return Err(E::DockArea { class: d.dock_class, area: d.area_id });
            }
            let rate_ok = d.spawn_rate.is_finite()
                && (0.0..=1.0).contains(&d.spawn_rate)
                && (d.role == DockRole::Supply || d.spawn_rate == 0.0);
            if !rate_ok {
                return Err(E::SpawnRate(d.dock_class));
            }
            if d.role == DockRole::Delivery && d.deliver_to.is_some() {
                return Err(E::DeliverToOnDelivery(d.dock_class));
            }
            docks.push(DockSpec {
                coord,
                area_id: d.area_id as u8,
                dock_class: d.dock_class,
                role: d.role,
                resource: d.resource,
                spawn_rate: d.spawn_rate,
                deliver_to: d.deliver_to,
            });
        }
        docks.sort_by_key(|d| d.dock_class);
        if let Some(w) = docks.windows(2).find(|w| w[0].dock_class == w[1].dock_class) {
            return Err(E::DuplicateDockClass(w[0].dock_class));
        }
        let mut dock_cells = Vec::with_capacity(docks.len());
        for (di, d) in docks.iter().enumerate() {
            let cell = index[&d.coord];
            if dock_at[cell as usize].is_some() {
                return Err(E::DockCount(d.coord));
            }
            dock_at[cell as usize] = Some(di as u16);
            dock_cells.push(cell);
        }
        for (i, k) in kinds.iter().enumerate() {
            if k.is_dock() && dock_at[i].is_none() {
                return Err(E::DockCount(coords[i]));
            }
        }
        let role_of: BTreeMap<u32, (DockRole, u8)> =
            docks.iter().map(|d| (d.dock_class, (d.role, d.area_id))).collect();
        let resolved: Vec<Option<u32>> = docks
            .iter()
            .map(|d| match (d.role, d.deliver_to) {
                (DockRole::Delivery, _) => Ok(None),
                (DockRole::Supply, Some(t)) => match role_of.get(&t) {
                    Some((DockRole::Delivery, _)) => Ok(Some(t)),
                    _ => Err(E::BadDeliverTo { class: d.dock_class, target: t }),
                },
                // Default: lowest delivery class of the same area.
                (DockRole::Supply, None) => role_of
                    .iter()
                    .find(|(_, (role, area))| *role == DockRole::Delivery && *area == d.area_id)
                    .map(|(c, _)| Some(*c))
                    .ok_or(E::NoDelivery(d.dock_class)),
            })
            .collect::<Result<_, _>>()?;
        for (d, t) in docks.iter_mut().zip(resolved) {
            d.deliver_to = t;
        }

        // Boats
        let mut boats: Vec<BoatInit> = Vec::with_capacity(file.boats.len());
        let mut seen = BTreeSet::new();
        let mut per_cell: BTreeMap<CellId, usize> = BTreeMap::new();
        for b in &file.boats {
            if b.id == u32::MAX {
                return Err(E::ReservedBoatId(b.id));
            }
            if !seen.insert(b.id) {
                return Err(E::DuplicateBoatId(b.id));
            }
            let coord = HexCoord::new(b.q, b.r);
            let cell = lookup(&format!("boat {}", b.id), coord)?;
            if b.area > u8::MAX as u32 {
                return Err(E::BoatArea { boat_id: b.id, area: b.area });
            }
            if !matches!(role_of.get(&b.class), Some((DockRole::Supply, _))) {
                return Err(E::BoatHome { boat_id: b.id, class: b.class });
            }
            *per_cell.entry(cell).or_default() += 1;
            boats.push(BoatInit {
                boat_id: b.id,
                coord,
                area_id: b.area as u8,
                home_class: b.class,
            });
        }
        boats.sort_by_key(|b| b.boat_id);
        for (&cell, &count) in &per_cell {
            let capacity = match chamber_of[cell as usize] {
                Some(li) => locks[li as usize].chamber_capacity as usize,
                None => slot_capacity as usize,
            };
            if count > capacity {
                return Err(E::CellOverCapacity {
                    coord: coords[cell as usize],
                    count,
                    capacity,
                });
            }
        }

        // Links and connectivity
        let links: Vec<[CellId; 6]> = coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut row = [NO_LINK; 6];
                for (d, slot) in row.iter_mut().enumerate() {
                    if let Some(&n) = index.get(&c.neighbor(d)) {
                        if gated_ok(&chamber_of, &lock_cells, i as CellId, n)
                            && gated_ok(&chamber_of, &lock_cells, n, i as CellId)
                        {
                            *slot = n;
                        }
                    }
                }
                row
            })
            .collect();
        let reach = distances_to(&links, 0);
        if let Some(i) = reach.iter().position(|&d| d == u32::MAX) {
            return Err(E::Disconnected(coords[i]));
        }

        Ok(World {
            name: file.name,
            slot_capacity,
            load_ticks: file.load_ticks,
            coords,
            kinds,
            index,
            links,
            locks,
            lock_cells,
            chamber_of,
            gate_cell,
            docks,
            dock_cells,
            dock_at,
            boats,
            routing: RoutingTable { classes: Vec::new(), dirs: Vec::new() },
        })
    }

    /// Canonical file form: sorted entries, every optional key explicit.
    pub fn to_file(&self) -> WorldFile {
        WorldFile {
            name: self.name.clone(),
            slot_capacity: self.slot_capacity as u32,
            load_ticks: self.load_ticks,
            cells: self
                .coords
                .iter()
                .zip(&self.kinds)
                .map(|(c, &kind)| CellEntry { q: c.q, r: c.r, kind })
                .collect(),
            locks: self
                .locks
                .iter()
                .map(|l| LockEntry {
                    lock_id: l.lock_id,
                    chamber: unpair(l.chamber),
                    low_gate: unpair(l.low_gate),
                    high_gate: unpair(l.high_gate),
                    raise_ticks: l.raise_ticks,
                    lower_ticks: l.lower_ticks,
                    chamber_capacity: l.chamber_capacity as u32,
                    auto_cycle: l.auto_cycle,
                })
                .collect(),
            docks: self
                .docks
                .iter()
                .map(|d| DockEntry {
                    coord: unpair(d.coord),
                    area_id: d.area_id as u32,
                    dock_class: d.dock_class,
                    role: d.role,
                    resource: d.resource,
                    spawn_rate: d.spawn_rate,
                    deliver_to: d.deliver_to,
                })
                .collect(),
            boats: self
                .boats
                .iter()
                .map(|b| BoatEntry {
                    id: b.boat_id,
                    q: b.coord.q,
                    r: b.coord.r,
                    area: b.area_id as u32,
                    class: b.home_class,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("world file serializes")
    }

    /// FNV-1a digest of the canonical serialization.
    pub fn world_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(self.to_json().as_bytes());
        h.finish()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slot_capacity(&self) -> u8 {
        self.slot_capacity
    }

    pub fn load_ticks(&self) -> u32 {
        self.load_ticks
    }

    pub fn cell_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[HexCoord] {
        &self.coords
    }

    pub fn coord(&self, cell: CellId) -> HexCoord {
        self.coords[cell as usize]
    }

    pub fn kind(&self, cell: CellId) -> CellKind {
        self.kinds[cell as usize]
    }

    pub fn cell_at(&self, coord: HexCoord) -> Option<CellId> {
        self.index.get(&coord).copied()
    }

    pub fn kind_at(&self, coord: HexCoord) -> Option<CellKind> {
        self.cell_at(coord).map(|c| self.kind(c))
    }

    /// Movement links of a cell, by direction (`NO_LINK` where blocked).
    pub fn links(&self, cell: CellId) -> &[CellId; 6] {
        &self.links[cell as usize]
    }

    pub fn all_links(&self) -> &[[CellId; 6]] {
        &self.links
    }

    pub fn locks(&self) -> &[LockSpec] {
        &self.locks
    }

    pub fn lock_cells(&self, lock_idx: usize) -> LockCells {
        self.lock_cells[lock_idx]
    }

    pub fn lock_index(&self, lock_id: u32) -> Option<usize> {
        self.locks.binary_search_by_key(&lock_id, |l| l.lock_id).ok()
    }

    /// Index of the lock whose chamber is `cell`.
    pub fn chamber_lock(&self, cell: CellId) -> Option<usize> {
        self.chamber_of[cell as usize].map(usize::from)
    }

    pub fn is_gate(&self, cell: CellId) -> bool {
        self.gate_cell[cell as usize]
    }

    /// Boats a cell may hold: chamber capacity for chambers, C elsewhere.
    pub fn cell_capacity(&self, cell: CellId) -> u8 {
        match self.chamber_lock(cell) {
            Some(li) => self.locks[li].chamber_capacity,
            None => self.slot_capacity,
        }
    }

    pub fn docks(&self) -> &[DockSpec] {
        &self.docks
    }

    pub fn dock_cell(&self, dock_idx: usize) -> CellId {
        self.dock_cells[dock_idx]
    }

    pub fn dock_at(&self, cell: CellId) -> Option<usize> {
        self.dock_at[cell as usize].map(usize::from)
    }

    pub fn dock_by_class(&self, class: u32) -> Option<&DockSpec> {
        self.docks
            .binary_search_by_key(&class, |d| d.dock_class)
            .ok()
            .map(|i| &self.docks[i])
    }

    pub fn initial_boats(&self) -> &[BoatInit] {
        &self.boats
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    /// Sorted list of economic area ids mentioned by docks or boats.
    pub fn areas(&self) -> Vec<u8> {
        let set: BTreeSet<u8> = self
            .docks
            .iter()
            .map(|d| d.area_id)
            .chain(self.boats.iter().map(|b| b.area_id))
            .collect();
        set.into_iter().collect()
    }

    /// Inclusive `(min, max)` corners of the coordinate bounding box.
    pub fn bounds(&self) -> (HexCoord, HexCoord) {
        let mut lo = self.coords[0];
        let mut hi = self.coords[0];
        for c in &self.coords {
            lo.q = lo.q.min(c.q);
            lo.r = lo.r.min(c.r);
            hi.q = hi.q.max(c.q);
            hi.r = hi.r.max(c.r);
        }
        (lo, hi)
    }
}

fn gated_ok(chamber_of: &[Option<u16>], lock_cells: &[LockCells], from: CellId, to: CellId) -> bool {
    match chamber_of[from as usize] {
        Some(li) => {
            let l = lock_cells[li as usize];
            to == l.low_gate || to == l.high_gate
        }
        None => true,
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} cells, {} locks, {} docks, {} boats)",
            self.name,
            self.coords.len(),
            self.locks.len(),
            self.docks.len(),
            self.boats.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_world(n: i32, extra: &str) -> String {
        let mut cells: Vec<String> = (0..n)
            .map(|q| format!(r#"{{"q":{q},"r":0,"kind":"channel"}}"#))
            .collect();
        cells[0] = r#"{"q":0,"r":0,"kind":"supply_dock"}"#.into();
        cells[n as usize - 1] = format!(r#"{{"q":{},"r":0,"kind":"delivery_dock"}}"#, n - 1);
        format!(
            r#"{{"name":"line","slot_capacity":2,"cells":[{}],
               "docks":[{{"coord":[0,0],"area_id":0,"dock_class":1,"role":"supply","resource":"coal","spawn_rate":0.5}},
                        {{"coord":[{},0],"area_id":0,"dock_class":2,"role":"delivery","resource":"coal"}}],
               "boats":[{{"id":1,"q":1,"r":0,"area":0,"class":1}}]{extra}}}"#,
            cells.join(","),
            n - 1
        )
    }

    #[test]
    fn minimal_line_world() {
        let w = World::from_json(&line_world(3, "")).unwrap();
        assert_eq!(w.cell_count(), 3);
        assert_eq!(w.initial_boats().len(), 1);
        assert_eq!(w.docks()[0].deliver_to, Some(2));
    }

    #[test]
    fn straight_channel_routes_east() {
        let w = World::from_json(&line_world(5, "")).unwrap();
        let k = w.routing().class_index(2).unwrap();
        for cell in 0..4 {
            assert_eq!(w.routing().route(cell, k), Route::Step(0));
        }
        assert_eq!(w.routing().route(4, k), Route::Here);
    }

    #[test]
    fn tie_break_prefers_smallest_direction() {
        // A hex ring around the absent cell (1,-1): from the origin the dock at
        // (2,-2) is three hops away both via (1,0) [dir 0] and (0,-1) [dir 2].
        let text = r#"{"name":"ring","slot_capacity":2,
            "cells":[{"q":0,"r":0,"kind":"supply_dock"},{"q":1,"r":0,"kind":"channel"},
                     {"q":2,"r":-1,"kind":"channel"},{"q":2,"r":-2,"kind":"delivery_dock"},
                     {"q":1,"r":-2,"kind":"channel"},{"q":0,"r":-1,"kind":"channel"}],
            "docks":[{"coord":[0,0],"area_id":0,"dock_class":0,"role":"supply","resource":"grain"},
                     {"coord":[2,-2],"area_id":0,"dock_class":1,"role":"delivery","resource":"grain"}]}"#;
        let w = World::from_json(text).unwrap();
        let origin = w.cell_at(HexCoord::new(0, 0)).unwrap();
        let k = w.routing().class_index(1).unwrap();
        assert_eq!(w.routing().route(origin, k), Route::Step(0));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = line_world(3, r#","extra":1"#);
        assert!(matches!(World::from_json(&text), Err(LoadError::Parse(_))));
    }

    #[test]
    fn gate_not_adjacent_names_lock() {
        let text = r#"{"name":"bad","slot_capacity":2,
            "cells":[{"q":0,"r":0,"kind":"channel"},{"q":1,"r":0,"kind":"lock_chamber"},
                     {"q":2,"r":0,"kind":"channel"},{"q":3,"r":0,"kind":"channel"}],
            "locks":[{"lock_id":7,"chamber":[1,0],"low_gate":[0,0],"high_gate":[3,0],
                      "raise_ticks":3,"lower_ticks":3,"chamber_capacity":1}]}"#;
        match World::from_json(text) {
            Err(LoadError::Validation(ValidationError::GateNotAdjacent { lock_id, gate })) => {
                assert_eq!(lock_id, 7);
                assert_eq!(gate, HexCoord::new(3, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        let dup = r#"{"name":"d","slot_capacity":2,"cells":[{"q":0,"r":0,"kind":"channel"},{"q":0,"r":0,"kind":"channel"}]}"#;
        assert!(matches!(
            World::from_json(dup),
            Err(LoadError::Validation(ValidationError::DuplicateCoord(_)))
        ));
        let far = r#"{"name":"d","slot_capacity":2,"cells":[{"q":40000,"r":0,"kind":"channel"}]}"#;
        assert!(matches!(
            World::from_json(far),
            Err(LoadError::Validation(ValidationError::CoordOutOfRange(_)))
        ));
        let split = r#"{"name":"d","slot_capacity":2,"cells":[{"q":0,"r":0,"kind":"channel"},{"q":2,"r":0,"kind":"channel"}]}"#;
        assert!(matches!(
            World::from_json(split),
            Err(LoadError::Validation(ValidationError::Disconnected(_)))
        ));
        let cap = r#"{"name":"d","slot_capacity":0,"cells":[{"q":0,"r":0,"kind":"channel"}]}"#;
        assert!(matches!(
            World::from_json(cap),
            Err(LoadError::Validation(ValidationError::SlotCapacity(0)))
        ));
        assert!(matches!(World::from_json("{"), Err(LoadError::Parse(_))));
    }

    #[test]
    fn overfull_cell_rejected() {
        let text = line_world(3, "").replace(
            r#""boats":[{"id":1,"q":1,"r":0,"area":0,"class":1}]"#,
            r#""boats":[{"id":1,"q":1,"r":0,"area":0,"class":1},{"id":2,"q":1,"r":0,"area":0,"class":1},{"id":3,"q":1,"r":0,"area":0,"class":1}]"#,
        );
        assert!(matches!(
            World::from_json(&text),
            Err(LoadError::Validation(ValidationError::CellOverCapacity { count: 3, .. }))
        ));
    }

    #[test]
    fn chamber_links_only_to_gates() {
        // Chamber at origin with a third neighbor that must not link to it.
        let text = r#"{"name":"lk","slot_capacity":2,
            "cells":[{"q":-1,"r":0,"kind":"channel"},{"q":0,"r":0,"kind":"lock_chamber"},
                     {"q":1,"r":0,"kind":"channel"},{"q":0,"r":1,"kind":"channel"},{"q":-1,"r":1,"kind":"channel"}],
            "locks":[{"lock_id":1,"chamber":[0,0],"low_gate":[-1,0],"high_gate":[1,0],
                      "raise_ticks":3,"lower_ticks":3,"chamber_capacity":1}]}"#;
        let w = World::from_json(text).unwrap();
        let ch = w.cell_at(HexCoord::new(0, 0)).unwrap();
        let side = w.cell_at(HexCoord::new(0, 1)).unwrap();
        assert!(!w.links(ch).contains(&side));
        assert!(!w.links(side).contains(&ch));
        assert_eq!(w.links(ch).iter().filter(|&&l| l != NO_LINK).count(), 2);
    }

    #[test]
    fn canonical_roundtrip() {
        let w = World::from_json(&line_world(6, "")).unwrap();
        let again = World::from_json(&w.to_json()).unwrap();
        assert_eq!(w, again);
        assert_eq!(w.world_hash(), again.world_hash());
    }
}
