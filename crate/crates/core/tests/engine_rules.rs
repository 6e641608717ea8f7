use nbca_core::engine::{Command, Frame, LockPhase};
use nbca_core::{Engine, HexCoord, World};
use serde_json::json;

fn line(capacity: u32, boats: serde_json::Value, locks: serde_json::Value) -> World {
    // q = -1 .. 4 on r = 0: area 1 delivery, area 0 supply, two channels,
    // area 1 supply, area 0 delivery.
    let kinds = ["delivery_dock", "supply_dock", "channel", "channel", "supply_dock", "delivery_dock"];
    let mut cells: Vec<_> = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| json!({"q": i as i32 - 1, "r": 0, "kind": k}))
        .collect();
    for l in locks.as_array().unwrap() {
        let ch = &l["chamber"];
        for c in cells.iter_mut() {
            if c["q"] == ch[0] && c["r"] == ch[1] {
                c["kind"] = json!("lock_chamber");
            }
        }
    }
    World::from_json(
        &json!({
            "name": "line",
            "slot_capacity": capacity,
            "cells": cells,
            "locks": locks,
            "docks": [
                {"coord": [-1, 0], "area_id": 1, "dock_class": 3, "role": "delivery", "resource": "grain"},
                {"coord": [0, 0], "area_id": 0, "dock_class": 0, "role": "supply", "resource": "coal"},
                {"coord": [3, 0], "area_id": 1, "dock_class": 2, "role": "supply", "resource": "grain"},
                {"coord": [4, 0], "area_id": 0, "dock_class": 1, "role": "delivery", "resource": "coal"}
            ],
            "boats": boats
        })
        .to_string(),
    )
    .unwrap()
}

fn at(world: &World, frame: &Frame, id: u32) -> HexCoord {
    world.coord(frame.boat(id).unwrap().cell)
}

#[test]
fn empty_world_only_counts_ticks() {
    let w = line(2, json!([]), json!([]));
    let mut f = Frame::initial(&w, 1);
    let start = f.clone();
    let mut e = Engine::new();
    for k in 1..=25u64 {
        e.step(&w, &mut f, &[]);
        assert_eq!(f.tick, k);
    }
    assert_eq!(f.slots, start.slots);
    assert!(f.boats.is_empty());
}

#[test]
fn opposing_boats_cannot_swap_in_single_slot_cells() {
    let w = line(1, json!([{"id": 1, "q": 2, "r": 0, "area": 0, "class": 0},
                           {"id": 2, "q": 1, "r": 0, "area": 1, "class": 2}]), json!([]));
    let mut f = Frame::initial(&w, 1);
    let mut e = Engine::new();
    for _ in 0..5 {
        assert_eq!(e.step(&w, &mut f, &[]).moves, 0);
    }
    assert_eq!(at(&w, &f, 1), HexCoord::new(2, 0));
    assert_eq!(at(&w, &f, 2), HexCoord::new(1, 0));
    assert_eq!(f.max_stall(), 5);
}

#[test]
fn opposing_boats_pass_when_a_slot_is_free() {
    let w = line(2, json!([{"id": 1, "q": 2, "r": 0, "area": 0, "class": 0},
                           {"id": 2, "q": 1, "r": 0, "area": 1, "class": 2}]), json!([]));
    let mut f = Frame::initial(&w, 1);
    Engine::new().step(&w, &mut f, &[]);
    assert_eq!(at(&w, &f, 1), HexCoord::new(1, 0));
    assert_eq!(at(&w, &f, 2), HexCoord::new(2, 0));
}

#[test]
fn lower_boat_id_wins_a_contested_slot() {
    // (0,0) and (1,-1) both route through (1,0) to the supply at (2,0).
    let text = json!({
        "name": "fork", "slot_capacity": 1,
        "cells": [
            {"q": 0, "r": 0, "kind": "channel"}, {"q": 1, "r": -1, "kind": "channel"},
            {"q": 1, "r": 0, "kind": "junction"}, {"q": 2, "r": 0, "kind": "supply_dock"},
            {"q": 3, "r": 0, "kind": "delivery_dock"}
        ],
        "locks": [],
        "docks": [
            {"coord": [2, 0], "area_id": 0, "dock_class": 0, "role": "supply", "resource": "coal"},
            {"coord": [3, 0], "area_id": 0, "dock_class": 1, "role": "delivery", "resource": "coal"}
        ],
        "boats": [{"id": 12, "q": 0, "r": 0, "area": 0, "class": 0},
                  {"id": 7, "q": 1, "r": -1, "area": 0, "class": 0}]
    });
    let w = World::from_json(&text.to_string()).unwrap();
    let mut f = Frame::initial(&w, 0);
    let report = Engine::new().step(&w, &mut f, &[]);
    assert_eq!(report.moves, 1);
    assert_eq!(at(&w, &f, 7), HexCoord::new(1, 0));
    assert_eq!(at(&w, &f, 12), HexCoord::new(0, 0));
    assert_eq!(f.boat(12).unwrap().stalled, 1);
}

#[test]
fn boats_cross_a_lock_only_through_open_gates() {
    // An area 1 boat on the low gate, heading east for its supply at (3,0).
    let locks = json!([{"lock_id": 5, "chamber": [1, 0], "low_gate": [0, 0], "high_gate": [2, 0],
                        "raise_ticks": 3, "lower_ticks": 2, "chamber_capacity": 1}]);
    let w = line(2, json!([{"id": 1, "q": 0, "r": 0, "area": 1, "class": 2}]), locks);
    let mut f = Frame::initial(&w, 0);
    let mut e = Engine::new();
    e.step(&w, &mut f, &[]);
    assert_eq!(at(&w, &f, 1), HexCoord::new(1, 0), "low gate is open");
    for _ in 0..10 {
        e.step(&w, &mut f, &[]);
    }
    assert_eq!(at(&w, &f, 1), HexCoord::new(1, 0), "high gate stays shut without an operate");
    assert_eq!(f.locks[0].phase, LockPhase::LowOpen);

    e.step(&w, &mut f, &[Command::OperateLock { lock_id: 5 }]);
    assert_eq!(f.locks[0].phase, LockPhase::Raising);
    for _ in 0..2 {
        e.step(&w, &mut f, &[]);
        assert_eq!(at(&w, &f, 1), HexCoord::new(1, 0), "no exit while raising");
    }
    e.step(&w, &mut f, &[]);
    assert_eq!(f.locks[0].phase, LockPhase::HighOpen);
    assert_eq!(at(&w, &f, 1), HexCoord::new(2, 0));
}

#[test]
fn unknown_lock_commands_are_ignored() {
    let w = line(2, json!([]), json!([]));
    let mut a = Frame::initial(&w, 0);
    let mut b = a.clone();
    let mut e = Engine::new();
    e.step(&w, &mut a, &[Command::OperateLock { lock_id: 77 }]);
    e.step(&w, &mut b, &[]);
    assert_eq!(a, b);
}

#[test]
fn boat_trades_after_dwelling() {
    // Boat already at its home supply with stock arriving every tick.
    let mut text: serde_json::Value = serde_json::from_str(&line(2, json!([]), json!([])).to_json()).unwrap();
    for d in text["docks"].as_array_mut().unwrap() {
        if d["dock_class"] == 0 {
            d["spawn_rate"] = json!(1.0);
        }
    }
    text["boats"] = json!([{"id": 3, "q": 0, "r": 0, "area": 0, "class": 0}]);
    let w = World::from_json(&text.to_string()).unwrap();
    let mut f = Frame::initial(&w, 0);
    let mut e = Engine::new();
    // load_ticks = 2: dwell starts on the first tick, trades on the third.
    e.step(&w, &mut f, &[]);
    e.step(&w, &mut f, &[]);
    assert_eq!(f.boat(3).unwrap().cargo, None);
    e.step(&w, &mut f, &[]);
    assert!(f.boat(3).unwrap().cargo.is_some());
    assert_eq!(f.boat(3).unwrap().target_class, 1);
    let supply = w.docks().iter().position(|d| d.dock_class == 0).unwrap();
    assert_eq!(f.docks[supply].stock, 2);
}

#[test]
fn contention_couples_cells_two_apart() {
    // Boats on (1,0) and (3,0) both want the single free slot of (2,0).
    // Removing the winner lets the boat two cells away move.
    let text = json!({
        "name": "pinch", "slot_capacity": 1,
        "cells": [
            {"q": 0, "r": 0, "kind": "delivery_dock"}, {"q": 1, "r": 0, "kind": "channel"},
            {"q": 2, "r": 0, "kind": "supply_dock"}, {"q": 3, "r": 0, "kind": "channel"}
        ],
        "locks": [],
        "docks": [
            {"coord": [2, 0], "area_id": 0, "dock_class": 0, "role": "supply", "resource": "coal"},
            {"coord": [0, 0], "area_id": 0, "dock_class": 1, "role": "delivery", "resource": "coal"}
        ],
        "boats": [{"id": 1, "q": 1, "r": 0, "area": 0, "class": 0},
                  {"id": 2, "q": 3, "r": 0, "area": 0, "class": 0}]
    });
    let w = World::from_json(&text.to_string()).unwrap();
    let mut with = Frame::initial(&w, 0);
    let mut without = with.clone();
    let x = w.cell_at(HexCoord::new(1, 0)).unwrap();
    without.slots[x as usize] = u32::MAX;
    without.boats.retain(|b| b.boat_id != 1);
    Engine::new().step(&w, &mut with, &[]);
    Engine::new().step(&w, &mut without, &[]);
    assert_eq!(at(&w, &with, 2), HexCoord::new(3, 0));
    assert_eq!(at(&w, &without, 2), HexCoord::new(2, 0));
}
