use std::collections::BTreeSet;

use nbca_core::engine::{frame_hash, LockPhase, EMPTY_SLOT};
use nbca_core::hex::{disk_size, hex_disk, hex_distance};
use nbca_core::locus::{apply_delta, encode_delta, extract};
use nbca_core::synth::{random_world, RandomWorldOptions};
use nbca_core::{Engine, Frame, HexCoord, Locus, World};
use nbca_testkit::{cube_distance, disk_by_scan, random_lock_commands, RefTopology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coord() -> impl Strategy<Value = HexCoord> {
    (-1000i32..1000, -1000i32..1000).prop_map(|(q, r)| HexCoord::new(q, r))
}

fn run(world: &World, frame: &mut Frame, ticks: u64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Engine::new();
    for _ in 0..ticks {
        let cmds = random_lock_commands(world, |n| rng.gen_range(0..n));
        e.step(world, frame, &cmds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn distance_is_a_metric(a in coord(), b in coord(), c in coord()) {
        prop_assert_eq!(hex_distance(a, b), cube_distance(a, b));
        prop_assert_eq!(hex_distance(a, b), hex_distance(b, a));
        prop_assert_eq!(hex_distance(a, a), 0);
        prop_assert!(hex_distance(a, c) <= hex_distance(a, b) + hex_distance(b, c));
        for n in a.neighbors() {
            prop_assert_eq!(hex_distance(a, n), 1);
        }
    }
}

proptest! {
    #[test]
    fn disk_matches_scan(center in coord(), radius in 0u32..=16) {
        let disk = hex_disk(center, radius);
        let scan = disk_by_scan(center, radius);
        prop_assert_eq!(disk.len(), disk_size(radius));
        prop_assert_eq!(disk.len() as u32, 1 + 3 * radius * (radius + 1));
        prop_assert!(disk.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(disk.into_iter().collect::<BTreeSet<_>>(), scan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deltas_rebuild_the_next_snapshot(seed in 0u64..10_000, ticks in 1u64..40, radius in 0u32..6) {
        let w = random_world(seed, &RandomWorldOptions::default());
        let mut f = Frame::initial(&w, seed);
        run(&w, &mut f, 5, seed);
        let center = w.coords()[seed as usize % w.cell_count()];
        let l = Locus { locus_id: 1, center, radius, stride: 1 };
        let mut view = extract(&f, &w, &l);
        let mut e = Engine::new();
        for _ in 0..ticks {
            let prev = extract(&f, &w, &l);
            e.step(&w, &mut f, &[]);
            let cur = extract(&f, &w, &l);
            let d = encode_delta(&prev, &cur).unwrap();
            prop_assert!(d.len() <= cur.len());
            apply_delta(&mut view, &d).unwrap();
            prop_assert_eq!(&view, &cur);
        }
    }

    #[test]
    fn per_tick_invariants(seed in 0u64..10_000) {
        let opts = RandomWorldOptions { slot_capacity: 1 + (seed % 3) as u32, ..Default::default() };
        let w = random_world(seed, &opts);
        let topo = RefTopology::new(&w);
        let mut f = Frame::initial(&w, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Engine::new();
        for _ in 0..150 {
            let before = f.clone();
            let cmds = random_lock_commands(&w, |n| rng.gen_range(0..n));
            e.step(&w, &mut f, &cmds);

            // Cargo is created only by spawning and destroyed only by delivery.
            prop_assert_eq!(f.ledger.spawned, f.cargo_in_system());
            prop_assert_eq!(f.scores.values().sum::<u64>(), f.ledger.delivered);

            // Capacity, and slots agree with boat positions.
            for cell in 0..w.cell_count() as u32 {
                prop_assert!(f.occupancy(cell) <= w.cell_capacity(cell));
            }
            let mut seen = 0;
            for b in &f.boats {
                prop_assert!(f.slots_of(b.cell).contains(&b.boat_id));
                seen += 1;
            }
            prop_assert_eq!(seen, f.slots.iter().filter(|&&s| s != EMPTY_SLOT).count());

            for (old, new) in before.boats.iter().zip(&f.boats) {
                let (a, b) = (w.coord(old.cell), w.coord(new.cell));
                if a == b {
                    continue;
                }
                // At most one hop, along a link.
                prop_assert!(topo.linked(a, b), "{} -> {} is not a link", a, b);
                // Chamber crossings only through the open gate.
                for (li, lock) in w.locks().iter().enumerate() {
                    let (inside, side) = if b == lock.chamber {
                        (true, a)
                    } else if a == lock.chamber {
                        (true, b)
                    } else {
                        (false, a)
                    };
                    if inside {
                        let want = if side == lock.low_gate { LockPhase::LowOpen } else { LockPhase::HighOpen };
                        prop_assert_eq!(f.locks[li].phase, want);
                    }
                }
            }
        }
    }

    #[test]
    fn influence_spreads_at_most_two_cells_per_tick(seed in 0u64..10_000, k in 1u64..6) {
        let w = random_world(seed, &RandomWorldOptions { width: 24, height: 24, max_boats: 60, ..Default::default() });
        let mut a = Frame::initial(&w, seed);
        run(&w, &mut a, 20, seed);
        prop_assume!(!a.boats.is_empty());
        // Remove one boat.
        let mut b = a.clone();
        let victim = b.boats.remove(seed as usize % b.boats.len());
        let x = w.coord(victim.cell);
        for s in b.slots.iter_mut() {
            if *s == victim.boat_id {
                *s = EMPTY_SLOT;
            }
        }
        let mut ea = Engine::new();
        let mut eb = Engine::new();
        for _ in 0..k {
            ea.step(&w, &mut a, &[]);
            eb.step(&w, &mut b, &[]);
        }
        let reach = 2 * k as u32;
        for (cell, &c) in w.coords().iter().enumerate() {
            if hex_distance(c, x) <= reach {
                continue;
            }
            let cell = cell as u32;
            prop_assert_eq!(a.slots_of(cell), b.slots_of(cell), "cell {}", c);
            for &id in a.slots_of(cell) {
                if id != EMPTY_SLOT {
                    prop_assert_eq!(a.boat(id), b.boat(id));
                }
            }
            if let Some(di) = w.dock_at(cell) {
                prop_assert_eq!(&a.docks[di], &b.docks[di]);
            }
            if let Some(li) = w.chamber_lock(cell) {
                prop_assert_eq!(a.locks[li], b.locks[li]);
            }
        }
    }
}

#[test]
fn frame_hash_sees_every_single_perturbation() {
    let w = nbca_core::demo_world();
    let mut base = Frame::initial(&w, 42);
    run(&w, &mut base, 300, 1);
    let h0 = frame_hash(&w, &base);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hashes = BTreeSet::from([h0]);
    for i in 0..10_000u32 {
        let mut f = base.clone();
        match i % 6 {
            0 => f.tick += rng.gen_range(1..1000),
            1 => {
                let s = rng.gen_range(0..f.slots.len());
                f.slots[s] = if f.slots[s] == EMPTY_SLOT { 1000 + i } else { EMPTY_SLOT };
            }
            2 => {
                let l = rng.gen_range(0..f.locks.len());
                f.locks[l].timer += rng.gen_range(1..50);
            }
            3 => {
                let d = rng.gen_range(0..f.docks.len());
                f.docks[d].stock += rng.gen_range(1..50);
            }
            4 => {
                let area = rng.gen_range(0..2u8);
                *f.scores.get_mut(&area).unwrap() += rng.gen_range(1..50);
            }
            _ => {
                let b = rng.gen_range(0..f.boats.len());
                f.boats[b].target_class ^= 1 + rng.gen_range(0..8);
            }
        }
        let h = frame_hash(&w, &f);
        assert_ne!(h, h0, "perturbation {i} unseen");
        hashes.insert(h);
    }
    assert!(hashes.len() > 1000);
}
