//! The `nbca` runner: load a world, step it headless or while serving
//! clients, and record or replay command logs.

pub mod replay;

use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use clap::Parser;
use log::{info, warn};
use nbca_core::synth::bench_world;
use nbca_core::{demo_world, Command, World};
use nbca_wire::net::{listen_tcp, listen_ws};
use nbca_wire::Runtime;

use replay::{hex64, Recorder, ReplayError, ReplayLog};

/// Ticks per second target, or unthrottled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Speed {
    Max,
    PerSec(u32),
}

impl FromStr for Speed {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("max") {
            return Ok(Speed::Max);
        }
        match s.parse::<u32>() {
            Ok(0) | Err(_) => Err(format!("speed must be a positive tick rate or \"max\", got {s:?}")),
            Ok(n) => Ok(Speed::PerSec(n)),
        }
    }
}

/// A listen address: `off`, a bare port, or `host:port`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Listen {
    Off,
    At(String),
}

impl FromStr for Listen {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("off") {
            Ok(Listen::Off)
        } else if let Ok(port) = s.parse::<u16>() {
            Ok(Listen::At(format!("0.0.0.0:{port}")))
        } else {
            Ok(Listen::At(s.to_string()))
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "nbca", version, about = "Hex-grid narrowboat traffic simulator")]
pub struct RunConfig {
    /// World file (JSON).
    #[arg(long, conflicts_with = "demo")]
    pub world: Option<PathBuf>,
    /// Use the bundled figure-eight world.
    #[arg(long)]
    pub demo: bool,
    /// Seed for dock supply. Replays take it from the log.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many ticks. Without it the run ends on Ctrl-C.
    #[arg(long)]
    pub ticks: Option<u64>,
    /// Ticks per second, or "max". Defaults to 10 while serving, else max.
    #[arg(long)]
    pub speed: Option<Speed>,
    /// TCP address (port, host:port or "off").
    #[arg(long, default_value = "off")]
    pub listen: Listen,
    /// WebSocket address, served at /ws (port, host:port or "off").
    #[arg(long = "listen-ws", default_value = "off")]
    pub listen_ws: Listen,
    /// Write every applied command to this log.
    #[arg(long, conflicts_with = "replay")]
    pub record: Option<PathBuf>,
    /// Feed the commands of this log at their recorded ticks.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Benchmark on a synthetic 10^5-cell world unless --world is given.
    #[arg(long)]
    pub bench: bool,
}

impl RunConfig {
    /// A headless run of the demo world.
    pub fn demo(seed: u64, ticks: u64) -> RunConfig {
        RunConfig {
            world: None,
            demo: true,
            seed: Some(seed),
            ticks: Some(ticks),
            speed: Some(Speed::Max),
            listen: Listen::Off,
            listen_ws: Listen::Off,
            record: None,
            replay: None,
            bench: false,
        }
    }

    fn serving(&self) -> bool {
        self.listen != Listen::Off || self.listen_ws != Listen::Off
    }
}

pub const BENCH_CELLS: usize = 100_000;
pub const BENCH_BOATS: usize = 750;
pub const BENCH_TICKS: u64 = 2000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read world {path}: {source}")]
    ReadWorld { path: PathBuf, source: std::io::Error },
    #[error("cannot load world: {0}")]
    Load(#[from] nbca_core::LoadError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("log seed {logged} differs from --seed {given}")]
    SeedMismatch { logged: u64, given: u64 },
    #[error("cannot write log: {0}")]
    Record(std::io::Error),
    #[error("replay ended at {actual} but the log recorded {expected}")]
    Diverged { expected: String, actual: String },
}

/// What a finished run reports, printed as `key=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub world: String,
    pub world_hash: u64,
    pub seed: u64,
    pub final_tick: u64,
    pub final_hash: u64,
    pub scores: Vec<(u8, u64)>,
    pub boats: usize,
    pub cargo_in_system: u64,
    pub max_stall: u32,
    pub commands: usize,
    pub cells: usize,
    pub ticks_per_sec: f64,
    pub wall_seconds: f64,
    /// Whether a replay reproduced the log's recorded final hash.
    pub replay_match: Option<bool>,
}

impl Summary {
    /// Summary lines whose values do not depend on timing.
    pub fn stable_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("world={}", self.world),
            format!("world_hash={}", hex64(self.world_hash)),
            format!("seed={}", self.seed),
            format!("final_tick={}", self.final_tick),
            format!("final_hash={}", hex64(self.final_hash)),
        ];
        for (area, total) in &self.scores {
            out.push(format!("score_area_{area}={total}"));
        }
        out.push(format!("boats={}", self.boats));
        out.push(format!("cargo_in_system={}", self.cargo_in_system));
        out.push(format!("max_stall={}", self.max_stall));
        out.push(format!("commands={}", self.commands));
        out.push(format!("cells={}", self.cells));
        if let Some(m) = self.replay_match {
            out.push(format!("replay_match={m}"));
        }
        out
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.stable_lines() {
            writeln!(f, "{line}")?;
        }
        writeln!(f, "ticks_per_sec={:.1}", self.ticks_per_sec)?;
        writeln!(f, "cells_per_sec={:.0}", self.ticks_per_sec * self.cells as f64)?;
        writeln!(f, "wall_seconds={:.3}", self.wall_seconds)
    }
}

fn load_world(config: &RunConfig) -> Result<World, RunError> {
    match (&config.world, config.demo, config.bench) {
        (Some(path), _, _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RunError::ReadWorld { path: path.clone(), source })?;
            Ok(World::from_json(&text)?)
        }
        (None, true, _) => Ok(demo_world()),
        (None, false, true) => Ok(bench_world(BENCH_CELLS, BENCH_BOATS)),
        (None, false, false) => Err(RunError::Usage("pass --world PATH, --demo or --bench".into())),
    }
}

fn resolve_addr(addr: &str) -> Result<SocketAddr, RunError> {
    addr.to_socket_addrs()
        .ok()
        .and_then(|mut a| a.next())
        .ok_or_else(|| RunError::Usage(format!("bad listen address {addr:?}")))
}

/// Run to completion (or until `stop` is set) and report.
pub fn run(config: &RunConfig, stop: &AtomicBool) -> Result<Summary, RunError> {
    let world = load_world(config)?;
    let world_hash = world.world_hash();

    let log = match &config.replay {
        Some(path) => {
            let log = ReplayLog::read(path)?;
            log.check_world(world_hash)?;
            if let Some(given) = config.seed.filter(|&s| s != log.header.seed) {
                return Err(RunError::SeedMismatch { logged: log.header.seed, given });
            }
            Some(log)
        }
        None => None,
    };
    let seed = log.as_ref().map(|l| l.header.seed).or(config.seed).unwrap_or(0);
    let max_ticks = config.ticks.or_else(|| {
        let log = log.as_ref()?;
        log.end.as_ref().map(|e| e.final_tick).or_else(|| log.entries.last().map(|e| e.tick + 1))
    });
    let max_ticks = match (max_ticks, config.bench) {
        (None, true) => Some(BENCH_TICKS),
        (t, _) => t,
    };

    let mut rt = Runtime::new(world, seed);
    let speed = config.speed.unwrap_or(if config.serving() { Speed::PerSec(10) } else { Speed::Max });
    rt.set_speed(match speed {
        Speed::Max => None,
        Speed::PerSec(n) => Some(n),
    });
    for (listen, ws) in [(&config.listen, false), (&config.listen_ws, true)] {
        if let Listen::At(addr) = listen {
            let sock = resolve_addr(addr)?;
            let bound = if ws { listen_ws(sock, rt.handle()) } else { listen_tcp(sock, rt.handle()) };
            let bound = bound.map_err(|source| RunError::Bind { addr: addr.clone(), source })?;
            info!("{} on {bound}", if ws { "websocket" } else { "tcp" });
        }
    }
    let mut recorder = match &config.record {
        Some(path) => Some(Recorder::create(path, world_hash, seed).map_err(RunError::Record)?),
        None => None,
    };

    // Replayed commands, consumed front to back as their ticks come up.
    let mut pending = log.as_ref().map(|l| l.entries.as_slice()).unwrap_or(&[]);
    let mut commands = 0usize;
    let mut record_err = None;
    let feed = |rt: &mut Runtime, pending: &mut &[replay::Entry]| {
        let tick = rt.tick();
        while let Some((e, rest)) = pending.split_first() {
            if e.tick > tick {
                break;
            }
            if e.tick < tick {
                warn!("log command for tick {} is late at {tick}", e.tick);
            }
            // Pacing belongs to the replaying operator, not the log.
            if !matches!(e.command, Command::SetSpeed { .. } | Command::PauseResume { .. }) {
                rt.inject(e.command.clone());
            }
            *pending = rest;
        }
    };

    let start = Instant::now();
    let start_tick = rt.tick();
    if max_ticks != Some(0) {
        feed(&mut rt, &mut pending);
        rt.run(stop, |rt, outcome| {
            if let Some(rec) = recorder.as_mut() {
                // Speed and pause changes since the last step happened while
                // the frame was at `outcome.tick` too.
                let immediate = rt.take_immediate();
                for (session, cmd) in immediate.iter().chain(&outcome.applied) {
                    if let Err(e) = rec.command(outcome.tick, *session, cmd) {
                        record_err.get_or_insert(e);
                    }
                }
            }
            commands += outcome.applied.len();
            if max_ticks.is_some_and(|m| rt.tick() >= m) {
                return false;
            }
            feed(rt, &mut pending);
            true
        });
    }
    let wall = start.elapsed().as_secs_f64();
    if let Some(e) = record_err {
        return Err(RunError::Record(e));
    }

    let frame = rt.frame();
    let final_hash = frame.hash(rt.world());
    if let Some(rec) = recorder {
        rec.finish(frame.tick, final_hash).map_err(RunError::Record)?;
    }
    let replay_match = log.as_ref().and_then(|l| {
        let end = l.end.as_ref()?;
        (end.final_tick == frame.tick).then(|| l.expected_hash() == Some(final_hash))
    });
    if replay_match == Some(false) {
        return Err(RunError::Diverged {
            expected: log.unwrap().end.unwrap().final_hash,
            actual: hex64(final_hash),
        });
    }
    let ticks = frame.tick - start_tick;
    Ok(Summary {
        world: rt.world().name().to_string(),
        world_hash,
        seed,
        final_tick: frame.tick,
        final_hash,
        scores: frame.scores.iter().map(|(&a, &t)| (a, t)).collect(),
        boats: frame.boats.len(),
        cargo_in_system: frame.cargo_in_system(),
        max_stall: frame.max_stall(),
        commands,
        cells: rt.world().cell_count(),
        ticks_per_sec: if wall > 0.0 { ticks as f64 / wall } else { 0.0 },
        wall_seconds: wall,
        replay_match,
    })
}
