//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! Nothing here shares code with the engine beyond the world loader and the
//! supply hash: adjacency, routing, locks, movement and docks are restated
//! from the rules, using coordinates and ordered maps instead of the engine's
//! flat arrays.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nbca_core::economy::{spawn_supply, CargoLedger, DockRuntime, ResourceKind};
use nbca_core::engine::{Boat, Command, Frame, LockPhase, LockRuntime, EMPTY_SLOT};
use nbca_core::topology::{CellKind, DockRole, World};
use nbca_core::HexCoord;

// ---------------------------------------------------------------------------
// Hex algebra via cube coordinates

/// Axial to cube `(x, y, z)` with `x + y + z = 0`.
pub fn to_cube(c: HexCoord) -> (i64, i64, i64) {
    let x = c.q as i64;
    let z = c.r as i64;
    (x, -x - z, z)
}

/// Distance as the Chebyshev norm of the cube difference.
pub fn cube_distance(a: HexCoord, b: HexCoord) -> u32 {
    let (ax, ay, az) = to_cube(a);
    let (bx, by, bz) = to_cube(b);
    (ax - bx).abs().max((ay - by).abs()).max((az - bz).abs()) as u32
}

/// All coordinates within `radius`, found by scanning the bounding square.
pub fn disk_by_scan(center: HexCoord, radius: u32) -> BTreeSet<HexCoord> {
    let r = radius as i32;
    let mut out = BTreeSet::new();
    for dq in -r..=r {
        for dr in -r..=r {
            let c = HexCoord::new(center.q + dq, center.r + dr);
            if cube_distance(center, c) <= radius {
                out.insert(c);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Adjacency and routing

const AXIAL: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

/// Static view of a world keyed by coordinate.
#[derive(Clone, Debug)]
pub struct RefTopology {
    pub kinds: BTreeMap<HexCoord, CellKind>,
    /// chamber -> (lock id, low gate, high gate)
    pub chambers: BTreeMap<HexCoord, (u32, HexCoord, HexCoord)>,
    pub gates: BTreeSet<HexCoord>,
}

impl RefTopology {
    pub fn new(world: &World) -> Self {
        let kinds = world.coords().iter().map(|&c| (c, world.kind_at(c).unwrap())).collect();
        let mut chambers = BTreeMap::new();
        let mut gates = BTreeSet::new();
        for l in world.locks() {
            chambers.insert(l.chamber, (l.lock_id, l.low_gate, l.high_gate));
            gates.insert(l.low_gate);
            gates.insert(l.high_gate);
        }
        RefTopology { kinds, chambers, gates }
    }

    fn one_way_ok(&self, a: HexCoord, b: HexCoord) -> bool {
        match self.chambers.get(&a) {
            Some(&(_, lo, hi)) => b == lo || b == hi,
            None => true,
        }
    }

    /// Whether a boat may ever pass between `a` and `b`.
    pub fn linked(&self, a: HexCoord, b: HexCoord) -> bool {
        self.kinds.contains_key(&a)
            && self.kinds.contains_key(&b)
            && cube_distance(a, b) == 1
            && self.one_way_ok(a, b)
            && self.one_way_ok(b, a)
    }

    /// Linked neighbours of `c`, tagged with their direction index.
    pub fn neighbours(&self, c: HexCoord) -> Vec<(usize, HexCoord)> {
        AXIAL
            .iter()
            .enumerate()
            .map(|(d, &(dq, dr))| (d, HexCoord::new(c.q + dq, c.r + dr)))
            .filter(|&(_, n)| self.linked(c, n))
            .collect()
    }

    /// Hop distances from every cell to `target`.
    pub fn hops_to(&self, target: HexCoord) -> BTreeMap<HexCoord, u32> {
        let mut dist = BTreeMap::from([(target, 0)]);
        let mut queue = VecDeque::from([target]);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            for (_, n) in self.neighbours(c) {
                if !dist.contains_key(&n) {
                    dist.insert(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn capacity(&self, world: &World, c: HexCoord) -> usize {
        match self.chambers.get(&c) {
            Some(&(id, _, _)) => {
                world.locks().iter().find(|l| l.lock_id == id).unwrap().chamber_capacity as usize
            }
            None => world.slot_capacity() as usize,
        }
    }
}

/// Per-class next hop: the first direction (in index order) whose neighbour
/// is one hop closer to the class's dock.
#[derive(Clone, Debug)]
pub struct RefRouter {
    next: BTreeMap<(HexCoord, u32), Option<HexCoord>>,
}

impl RefRouter {
    pub fn new(world: &World, topo: &RefTopology) -> Self {
        let mut next = BTreeMap::new();
        for dock in world.docks() {
            let dist = topo.hops_to(dock.coord);
            for &c in topo.kinds.keys() {
                let hop = if c == dock.coord {
                    None
                } else {
                    let d = dist[&c];
                    topo.neighbours(c).into_iter().find(|(_, n)| dist[n] + 1 == d).map(|(_, n)| n)
                };
                next.insert((c, dock.dock_class), hop);
            }
        }
        RefRouter { next }
    }

    pub fn next(&self, at: HexCoord, class: u32) -> Option<HexCoord> {
        self.next[&(at, class)]
    }

    /// Follow the routing from `from` to the dock of `class`, counting hops.
    pub fn path_len(&self, from: HexCoord, class: u32) -> usize {
        let mut at = from;
        let mut n = 0;
        while let Some(nx) = self.next(at, class) {
            at = nx;
            n += 1;
            assert!(n < 1_000_000, "routing loop");
        }
        n
    }
}

// ---------------------------------------------------------------------------
// Reference stepper

#[derive(Clone, Debug, PartialEq, Eq)]
struct RefBoat {
    at: HexCoord,
    area: u8,
    home: u32,
    delivery: u32,
    target: u32,
    cargo: Option<ResourceKind>,
    stalled: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RefLock {
    /// 0 low open, 1 raising, 2 high open, 3 lowering
    phase: u8,
    timer: u32,
    latched: bool,
}

/// A sequential, coordinate-keyed re-implementation of one tick.
#[derive(Clone, Debug)]
pub struct RefSim {
    pub tick: u64,
    seed: u64,
    topo: RefTopology,
    router: RefRouter,
    slots: BTreeMap<HexCoord, Vec<u32>>,
    boats: BTreeMap<u32, RefBoat>,
    locks: BTreeMap<u32, RefLock>,
    docks: BTreeMap<u32, DockRuntime>,
    scores: BTreeMap<u8, u64>,
    ledger: CargoLedger,
}

impl RefSim {
    pub fn new(world: &World, seed: u64) -> Self {
        let topo = RefTopology::new(world);
        let router = RefRouter::new(world, &topo);
        let mut slots: BTreeMap<HexCoord, Vec<u32>> = topo
            .kinds
            .keys()
            .map(|&c| (c, vec![EMPTY_SLOT; world.slot_capacity() as usize]))
            .collect();
        let mut boats = BTreeMap::new();
        let mut by_id: Vec<_> = world.initial_boats().to_vec();
        by_id.sort_by_key(|b| b.boat_id);
        for b in by_id {
            let row = slots.get_mut(&b.coord).unwrap();
            *row.iter_mut().find(|s| **s == EMPTY_SLOT).unwrap() = b.boat_id;
            let delivery = world.dock_by_class(b.home_class).unwrap().deliver_to.unwrap();
            boats.insert(
                b.boat_id,
                RefBoat {
                    at: b.coord,
                    area: b.area_id,
                    home: b.home_class,
                    delivery,
                    target: b.home_class,
                    cargo: None,
                    stalled: 0,
                },
            );
        }
        RefSim {
            tick: 0,
            seed,
            slots,
            boats,
            locks: world
                .locks()
                .iter()
                .map(|l| (l.lock_id, RefLock { phase: 0, timer: 0, latched: false }))
                .collect(),
            docks: world.docks().iter().map(|d| (d.dock_class, DockRuntime::default())).collect(),
            scores: world
                .docks()
                .iter()
                .map(|d| d.area_id)
                .chain(world.initial_boats().iter().map(|b| b.area_id))
                .map(|a| (a, 0))
                .collect(),
            ledger: CargoLedger::default(),
            topo,
            router,
        }
    }

    fn occupants(&self, c: HexCoord) -> impl Iterator<Item = u32> + '_ {
        self.slots[&c].iter().copied().filter(|&s| s != EMPTY_SLOT)
    }

    fn wants(&self, id: u32) -> Option<HexCoord> {
        let b = &self.boats[&id];
        self.router.next(b.at, b.target)
    }

    fn may_cross(&self, from: HexCoord, to: HexCoord, phases: &BTreeMap<u32, RefLock>) -> bool {
        let side_open = |ch: HexCoord, side: HexCoord| {
            let (id, lo, hi) = self.topo.chambers[&ch];
            let p = phases[&id].phase;
            (side == lo && p == 0) || (side == hi && p == 2)
        };
        (!self.topo.chambers.contains_key(&to) || side_open(to, from))
            && (!self.topo.chambers.contains_key(&from) || side_open(from, to))
    }

    pub fn step(&mut self, world: &World, commands: &[Command]) {
        // Commands.
        for c in commands {
            if let Command::OperateLock { lock_id } = c {
                if let Some(l) = self.locks.get_mut(lock_id) {
                    l.latched = true;
                }
            }
        }

        // Locks, from start-of-tick positions.
        let mut locks = self.locks.clone();
        for l in world.locks() {
            let st = locks.get_mut(&l.lock_id).unwrap();
            let heading = |cell: HexCoord, to: HexCoord| self.occupants(cell).any(|id| self.wants(id) == Some(to));
            let in_low = heading(l.chamber, l.low_gate);
            let in_high = heading(l.chamber, l.high_gate);
            let wait_low = heading(l.low_gate, l.chamber);
            let wait_high = heading(l.high_gate, l.chamber);
            if l.auto_cycle && !st.latched && (st.phase == 0 || st.phase == 2) {
                let (near_in, far_in, near_wait, far_wait) = if st.phase == 0 {
                    (in_low, in_high, wait_low, wait_high)
                } else {
                    (in_high, in_low, wait_high, wait_low)
                };
                let go = if near_in || far_in { far_in && !near_in } else { far_wait && !near_wait };
                if go {
                    st.latched = true;
                }
            }
            match st.phase {
                0 | 2 if st.latched => {
                    st.timer = if st.phase == 0 { l.raise_ticks } else { l.lower_ticks };
                    st.phase += 1;
                    st.latched = false;
                }
                1 | 3 => {
                    st.timer -= 1;
                    if st.timer == 0 {
                        st.phase = (st.phase + 1) % 4;
                    }
                }
                _ => {}
            }
        }

        // Movement, destination by destination: candidates are boats on
        // neighbouring cells routed here through open gates; they take the
        // free slots in id order. Gate cells hold one slot back for boats
        // leaving their chamber.
        let mut granted: Vec<(u32, HexCoord, HexCoord)> = Vec::new();
        for (&dest, row) in &self.slots {
            let free = self.topo.capacity(world, dest) - row.iter().filter(|&&s| s != EMPTY_SLOT).count();
            let mut cands: Vec<(u32, HexCoord)> = Vec::new();
            for (_, src) in self.topo.neighbours(dest) {
                for id in self.occupants(src) {
                    if self.wants(id) == Some(dest) && self.may_cross(src, dest, &locks) {
                        cands.push((id, src));
                    }
                }
            }
            cands.sort();
            // Outside entrants into a gate may not take the last free slot.
            let (mut taken, mut outside) = (0, 0);
            for (id, src) in cands {
                let keep_clear = world.slot_capacity() >= 2
                    && self.topo.gates.contains(&dest)
                    && !self.topo.chambers.contains_key(&src);
                if taken == free || (keep_clear && outside + 1 >= free) {
                    continue;
                }
                taken += 1;
                if keep_clear {
                    outside += 1;
                }
                granted.push((id, src, dest));
            }
        }
        granted.sort();
        let moved: BTreeSet<u32> = granted.iter().map(|g| g.0).collect();
        let wanting: BTreeSet<u32> = self.boats.keys().copied().filter(|&id| self.wants(id).is_some()).collect();
        for (id, b) in self.boats.iter_mut() {
            b.stalled = if wanting.contains(id) && !moved.contains(id) { b.stalled + 1 } else { 0 };
        }
        for &(id, _, dest) in &granted {
            let row = self.slots.get_mut(&dest).unwrap();
            *row.iter_mut().find(|s| **s == EMPTY_SLOT).unwrap() = id;
        }
        for &(id, src, dest) in &granted {
            let row = self.slots.get_mut(&src).unwrap();
            *row.iter_mut().find(|s| **s == id).unwrap() = EMPTY_SLOT;
            self.boats.get_mut(&id).unwrap().at = dest;
        }
        self.locks = locks;

        // Docks: spawn, then each boat at its target dock in id order.
        for d in world.docks() {
            let n = spawn_supply(d, self.tick, self.seed);
            self.docks.get_mut(&d.dock_class).unwrap().stock += n;
            self.ledger.spawned += n;
        }
        let load_ticks = world.load_ticks();
        for (&id, b) in self.boats.iter_mut() {
            let Some(dock) = world.docks().iter().find(|d| d.coord == b.at && d.dock_class == b.target) else {
                continue;
            };
            let rt = self.docks.get_mut(&dock.dock_class).unwrap();
            let left = match rt.dwell.get(&id) {
                None => {
                    rt.dwell.insert(id, load_ticks);
                    continue;
                }
                Some(&n) => n - 1,
            };
            rt.dwell.insert(id, left);
            if left > 0 {
                continue;
            }
            rt.dwell.remove(&id);
            match dock.role {
                DockRole::Supply if b.cargo.is_none() && rt.stock > 0 => {
                    rt.stock -= 1;
                    b.cargo = Some(dock.resource);
                    b.target = b.delivery;
                    self.ledger.loaded += 1;
                }
                DockRole::Delivery if b.cargo.is_some() => {
                    b.cargo = None;
                    b.target = b.home;
                    *self.scores.get_mut(&dock.area_id).unwrap() += 1;
                    self.ledger.delivered += 1;
                }
                _ => {
                    rt.dwell.insert(id, load_ticks);
                }
            }
        }
        self.tick += 1;
    }

    /// The engine's representation of the current state.
    pub fn to_frame(&self, world: &World) -> Frame {
        let mut slots = Vec::new();
        for &c in world.coords() {
            slots.extend_from_slice(&self.slots[&c]);
        }
        let boats = self
            .boats
            .iter()
            .map(|(&id, b)| Boat {
                boat_id: id,
                area_id: b.area,
                home_class: b.home,
                delivery_class: b.delivery,
                target_class: b.target,
                cargo: b.cargo,
                cell: world.cell_at(b.at).unwrap(),
                stalled: b.stalled,
            })
            .collect();
        let locks = world
            .locks()
            .iter()
            .map(|l| {
                let s = self.locks[&l.lock_id];
                LockRuntime { phase: LockPhase::from_code(s.phase).unwrap(), timer: s.timer, latched: s.latched }
            })
            .collect();
        let docks = world.docks().iter().map(|d| self.docks[&d.dock_class].clone()).collect();
        Frame {
            tick: self.tick,
            rng_seed: self.seed,
            capacity: world.slot_capacity(),
            slots,
            boats,
            locks,
            docks,
            scores: self.scores.clone(),
            ledger: self.ledger,
        }
    }
}

/// Random `OperateLock` commands for the locks of `world` (some for unknown
/// ids), using a caller-supplied coin.
pub fn random_lock_commands(world: &World, mut coin: impl FnMut(u32) -> u32) -> Vec<Command> {
    let mut out = Vec::new();
    for l in world.locks() {
        if coin(8) == 0 {
            out.push(Command::OperateLock { lock_id: l.lock_id });
        }
    }
    if coin(20) == 0 {
        out.push(Command::OperateLock { lock_id: 9_999 });
    }
    out
}

// ---------------------------------------------------------------------------
// Frame digest

/// The canonical frame digest, restated byte by byte: 64-bit FNV-1a over the
/// tick, every cell in `(q, r)` order with its slots, locks by id, docks by
/// coordinate with stock and dwell table, scores by area, and boats by id
/// with target class and cargo code (0xFF for none). Little-endian integers.
pub fn reference_frame_hash(world: &World, frame: &Frame) -> u64 {
    let mut bytes: Vec<u8> = Vec::new();
    bytes.extend(frame.tick.to_le_bytes());
    let mut cells: Vec<(HexCoord, usize)> = world.coords().iter().enumerate().map(|(i, &c)| (c, i)).collect();
    cells.sort();
    let cap = frame.capacity as usize;
    for (c, i) in cells {
        bytes.extend(c.q.to_le_bytes());
        bytes.extend(c.r.to_le_bytes());
        for s in &frame.slots[i * cap..(i + 1) * cap] {
            bytes.extend(s.to_le_bytes());
        }
    }
    let mut locks: Vec<(u32, usize)> = world.locks().iter().enumerate().map(|(i, l)| (l.lock_id, i)).collect();
    locks.sort();
    for (id, i) in locks {
        let l = frame.locks[i];
        bytes.extend(id.to_le_bytes());
        bytes.push(match l.phase {
            LockPhase::LowOpen => 0,
            LockPhase::Raising => 1,
            LockPhase::HighOpen => 2,
            LockPhase::Lowering => 3,
        });
        bytes.extend(l.timer.to_le_bytes());
        bytes.push(l.latched as u8);
    }
    let mut docks: Vec<(HexCoord, usize)> = world.docks().iter().enumerate().map(|(i, d)| (d.coord, i)).collect();
    docks.sort();
    for (c, i) in docks {
        let d = &frame.docks[i];
        bytes.extend(c.q.to_le_bytes());
        bytes.extend(c.r.to_le_bytes());
        bytes.extend(d.stock.to_le_bytes());
        bytes.extend((d.dwell.len() as u32).to_le_bytes());
        for (id, left) in &d.dwell {
            bytes.extend(id.to_le_bytes());
            bytes.extend(left.to_le_bytes());
        }
    }
    for (area, score) in &frame.scores {
        bytes.push(*area);
        bytes.extend(score.to_le_bytes());
    }
    for b in &frame.boats {
        bytes.extend(b.boat_id.to_le_bytes());
        bytes.extend(b.target_class.to_le_bytes());
        bytes.push(match b.cargo {
            Some(ResourceKind::Coal) => 0,
            Some(ResourceKind::Grain) => 1,
            None => 0xFF,
        });
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
