//! Synthetic world generators for tests, benchmarks and scaling runs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::economy::ResourceKind;
use crate::hex::HexCoord;
use crate::topology::{
    BoatEntry, CellEntry, CellKind, DockEntry, DockRole, LockEntry, World, WorldFile,
};

/// Parameters for [`random_world`].
#[derive(Clone, Debug)]
pub struct RandomWorldOptions {
    pub width: i32,
    pub height: i32,
    /// Probability that a cell of the bounding parallelogram is bank.
    pub hole_rate: f64,
    pub max_locks: usize,
    pub max_boats: usize,
    pub areas: u8,
    pub slot_capacity: u32,
}

impl Default for RandomWorldOptions {
    fn default() -> Self {
        RandomWorldOptions {
            width: 16,
            height: 16,
            hole_rate: 0.35,
            max_locks: 3,
            max_boats: 20,
            areas: 2,
            slot_capacity: 2,
        }
    }
}

fn component(cells: &BTreeSet<HexCoord>, start: HexCoord) -> BTreeSet<HexCoord> {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors() {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// A random connected world inside a `width x height` parallelogram, with a
/// few locks, one supply and one delivery dock per area, and random boats.
/// Deterministic in `seed`.
pub fn random_world(seed: u64, opts: &RandomWorldOptions) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let file = random_world_file(&mut rng, opts);
        if let Ok(w) = World::from_file(file) {
            return w;
        }
    }
}

fn random_world_file(rng: &mut ChaCha8Rng, opts: &RandomWorldOptions) -> WorldFile {
    let mut all = BTreeSet::new();
    for q in 0..opts.width {
        for r in 0..opts.height {
            if !rng.gen_bool(opts.hole_rate) {
                all.insert(HexCoord::new(q, r));
            }
        }
    }
    // Largest component.
    let mut cells = BTreeSet::new();
    let mut rest = all.clone();
    while let Some(&start) = rest.iter().next() {
        let comp = component(&rest, start);
        for c in &comp {
            rest.remove(c);
        }
        if comp.len() > cells.len() {
            cells = comp;
        }
    }
    let coords: Vec<HexCoord> = cells.iter().copied().collect();
    let mut kinds: BTreeMap<HexCoord, CellKind> = coords
        .iter()
        .map(|&c| {
            let degree = c.neighbors().iter().filter(|n| cells.contains(n)).count();
            (c, if degree >= 3 { CellKind::Junction } else { CellKind::Channel })
        })
        .collect();
    let mut reserved: BTreeSet<HexCoord> = BTreeSet::new();

    let mut locks = Vec::new();
    let n_locks = rng.gen_range(0..=opts.max_locks);
    for lock_id in 0..n_locks as u32 {
        for _attempt in 0..20 {
            let &chamber = coords.choose(rng).expect("non-empty");
            if reserved.contains(&chamber) {
                continue;
            }
            let mut open: Vec<HexCoord> = chamber
                .neighbors()
                .into_iter()
                .filter(|n| cells.contains(n) && kinds[n] != CellKind::LockChamber)
                .collect();
            if open.len() < 2 {
                continue;
            }
            open.shuffle(rng);
            let (low, high) = (open[0], open[1]);
            kinds.insert(chamber, CellKind::LockChamber);
            locks.push(LockEntry {
                lock_id,
                chamber: [chamber.q, chamber.r],
                low_gate: [low.q, low.r],
                high_gate: [high.q, high.r],
                raise_ticks: rng.gen_range(1..=4),
                lower_ticks: rng.gen_range(1..=4),
                chamber_capacity: rng.gen_range(1..=opts.slot_capacity),
                auto_cycle: rng.gen_bool(0.5),
            });
            reserved.insert(chamber);
            reserved.insert(low);
            reserved.insert(high);
            break;
        }
    }

    let free: Vec<HexCoord> = coords
        .iter()
        .copied()
        .filter(|c| kinds[c] != CellKind::LockChamber)
        .collect();
    let mut docks = Vec::new();
    let mut dock_cells = BTreeSet::new();
    for area in 0..opts.areas {
        for (role, class) in [(DockRole::Supply, 2 * area as u32), (DockRole::Delivery, 2 * area as u32 + 1)] {
            let coord = loop {
                let &c = free.choose(rng).expect("non-empty");
                if dock_cells.insert(c) {
                    break c;
                }
            };
            kinds.insert(
                coord,
                if role == DockRole::Supply { CellKind::SupplyDock } else { CellKind::DeliveryDock },
            );
            docks.push(DockEntry {
                coord: [coord.q, coord.r],
                area_id: area as u32,
                dock_class: class,
                role,
                resource: if area % 2 == 0 { ResourceKind::Coal } else { ResourceKind::Grain },
                spawn_rate: if role == DockRole::Supply {
                    *[0.0, 0.1, 0.5, 1.0].choose(rng).expect("non-empty")
                } else {
                    0.0
                },
                deliver_to: None,
            });
        }
    }

    let mut boats = Vec::new();
    let mut load: BTreeMap<HexCoord, u32> = BTreeMap::new();
    let n_boats = rng.gen_range(0..=opts.max_boats);
    for id in 0..n_boats as u32 {
        let &c = free.choose(rng).expect("non-empty");
        let l = load.entry(c).or_default();
        if *l >= opts.slot_capacity {
            continue;
        }
        *l += 1;
        let area = rng.gen_range(0..opts.areas) as u32;
        boats.push(BoatEntry { id: id * 3 + 1, q: c.q, r: c.r, area, class: 2 * area });
    }

    WorldFile {
        name: "random".into(),
        slot_capacity: opts.slot_capacity,
        load_ticks: rng.gen_range(1..=3),
        cells: kinds.into_iter().map(|(c, kind)| CellEntry { q: c.q, r: c.r, kind }).collect(),
        locks,
        docks,
        boats,
    }
}

/// An all-water `width x height` parallelogram with one supply and one
/// delivery dock per area in opposite corners, and `boats` boats placed
/// along the first row.
pub fn open_water(width: i32, height: i32, areas: u8, boats: usize) -> WorldFile {
    let mut cells: BTreeMap<HexCoord, CellKind> = BTreeMap::new();
    for q in 0..width {
        for r in 0..height {
            cells.insert(HexCoord::new(q, r), CellKind::Channel);
        }
    }
    let mut docks = Vec::new();
    for area in 0..areas as i32 {
        let supply = HexCoord::new(area, 0);
        let delivery = HexCoord::new(width - 1 - area, height - 1);
        cells.insert(supply, CellKind::SupplyDock);
        cells.insert(delivery, CellKind::DeliveryDock);
        docks.push(DockEntry {
            coord: [supply.q, supply.r],
            area_id: area as u32,
            dock_class: 2 * area as u32,
            role: DockRole::Supply,
            resource: ResourceKind::Coal,
            spawn_rate: 0.5,
            deliver_to: None,
        });
        docks.push(DockEntry {
            coord: [delivery.q, delivery.r],
            area_id: area as u32,
            dock_class: 2 * area as u32 + 1,
            role: DockRole::Delivery,
            resource: ResourceKind::Coal,
            spawn_rate: 0.0,
            deliver_to: None,
        });
    }
    let boats = (0..boats)
        .map(|i| {
            let area = (i % areas as usize) as u32;
            let q = (i / 2) as i32 % width;
            let r = 1 + (i / 2) as i32 / width;
            BoatEntry { id: i as u32, q, r, area, class: 2 * area }
        })
        .collect();
    WorldFile {
        name: format!("open-{width}x{height}"),
        slot_capacity: 2,
        load_ticks: 2,
        cells: cells.into_iter().map(|(c, kind)| CellEntry { q: c.q, r: c.r, kind }).collect(),
        locks: Vec::new(),
        docks,
        boats,
    }
}

/// Side of one benchmark tile.
const TILE: i32 = 40;
/// Supply-to-delivery offset along each of directions 0 and 1 within a tile.
const LEG: i32 = 16;

/// A benchmark world of roughly `cells` passable cells: open water cut into
/// square tiles, each with its own area, supply and delivery dock, and an
/// auto-cycling lock. Docks sit `LEG` steps apart along directions 0 and 1,
/// so the smallest-direction tie-break sends loaded boats east-then-northeast
/// and empty boats west-then-southwest: traffic circulates one way round a
/// parallelogram and never meets head on. `boats` are spread over the tiles
/// on the return leg.
pub fn bench_world(cells: usize, boats: usize) -> World {
    let side = ((cells as f64).sqrt().ceil() as i32).max(TILE);
    let tiles_per_side = side / TILE;
    let mut kinds: BTreeMap<HexCoord, CellKind> = BTreeMap::new();
    for q in 0..side {
        for r in 0..side {
            kinds.insert(HexCoord::new(q, r), CellKind::Channel);
        }
    }
    let mut docks = Vec::new();
    let mut locks = Vec::new();
    let mut returns: Vec<Vec<(HexCoord, u32, u32)>> = Vec::new();
    for ty in 0..tiles_per_side {
        for tx in 0..tiles_per_side {
            let t = (ty * tiles_per_side + tx) as u32;
            let area = t % 256;
            let origin = HexCoord::new(tx * TILE, ty * TILE);
            let supply = origin + HexCoord::new(4, 4 + 2 * LEG);
            let delivery = supply + HexCoord::new(2 * LEG, -LEG);
            kinds.insert(supply, CellKind::SupplyDock);
            kinds.insert(delivery, CellKind::DeliveryDock);
            let resource = if t % 2 == 0 { ResourceKind::Coal } else { ResourceKind::Grain };
            docks.push(DockEntry {
                coord: [supply.q, supply.r],
                area_id: area,
                dock_class: 2 * t,
                role: DockRole::Supply,
                resource,
                spawn_rate: 0.5,
                deliver_to: Some(2 * t + 1),
            });
            docks.push(DockEntry {
                coord: [delivery.q, delivery.r],
                area_id: area,
                dock_class: 2 * t + 1,
                role: DockRole::Delivery,
                resource,
                spawn_rate: 0.0,
                deliver_to: None,
            });
            // Lock on the eastbound leg.
            let chamber = supply + HexCoord::new(LEG / 2, 0);
            kinds.insert(chamber, CellKind::LockChamber);
            locks.push(LockEntry {
                lock_id: t,
                chamber: [chamber.q, chamber.r],
                low_gate: [chamber.q - 1, chamber.r],
                high_gate: [chamber.q + 1, chamber.r],
                raise_ticks: 1,
                lower_ticks: 1,
                chamber_capacity: 1,
                auto_cycle: true,
            });
            // Return leg: west from the delivery dock, then south-west.
            let mut leg = Vec::new();
            let mut at = delivery;
            for step in 0..2 * LEG - 1 {
                at = at + if step < LEG { HexCoord::new(-1, 0) } else { HexCoord::new(-1, 1) };
                leg.push((at, area, 2 * t));
            }
            returns.push(leg);
        }
    }
    let mut placed = Vec::with_capacity(boats);
    let mut used = vec![0usize; returns.len()];
    while placed.len() < boats {
        let tile = placed.len() % returns.len();
        let k = used[tile];
        let slot = k / 2;
        assert!(slot < returns[tile].len(), "too many boats for the bench world");
        used[tile] += 1;
        let (c, area, class) = returns[tile][slot];
        placed.push(BoatEntry { id: placed.len() as u32, q: c.q, r: c.r, area, class });
    }
    let file = WorldFile {
        name: format!("bench-{}", side * side),
        slot_capacity: 2,
        load_ticks: 2,
        cells: kinds.into_iter().map(|(c, kind)| CellEntry { q: c.q, r: c.r, kind }).collect(),
        locks,
        docks,
        boats: placed,
    };
    World::from_file(file).expect("bench world is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_worlds_are_deterministic() {
        let opts = RandomWorldOptions::default();
        assert_eq!(random_world(3, &opts), random_world(3, &opts));
        assert!(random_world(3, &opts).initial_boats().len() <= 20);
    }

    #[test]
    fn open_water_loads() {
        let w = World::from_file(open_water(12, 10, 2, 6)).unwrap();
        assert_eq!(w.cell_count(), 120);
        assert_eq!(w.initial_boats().len(), 6);
    }
}
