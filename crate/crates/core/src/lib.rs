//! Deterministic cellular-automaton microsimulation of narrowboat traffic on
//! a hexagonal canal network.
//!
//! The whole world advances every tick through a local, synchronous rule
//! ([`engine`]). Consumers never see the full state: they subscribe to small
//! hex disks ([`locus`]) and receive fixed-size cell records for just those
//! cells.

pub mod economy;
pub mod engine;
pub mod hash;
pub mod hex;
pub mod locus;
pub mod synth;
pub mod topology;

pub use economy::{CargoLedger, DockRuntime, ResourceKind, ScoreEvent};
pub use engine::{frame_hash, step, Boat, Command, Engine, Frame, LockPhase, LockRuntime, StepReport};
pub use hex::{hex_disk, hex_distance, neighbors, HexCoord};
pub use locus::{Locus, LocusDelta, LocusRegistry, LocusSnapshot};
pub use topology::{CellKind, LoadError, World};

/// The bundled figure-eight demo world file.
pub const DEMO_WORLD: &str = include_str!("../worlds/figure-eight.json");

/// Load the bundled demo world.
pub fn demo_world() -> World {
    World::from_json(DEMO_WORLD).expect("bundled demo world is valid")
}
