//! The simulation as seen by network sessions.
//!
//! [`Runtime`] owns the world, the current frame and every session's loci.
//! Connection threads talk to it only through an [`Inbound`] channel, and it
//! talks back only through bounded per-session outboxes that it never blocks
//! on: a full outbox evicts the session with `SLOW_CONSUMER`.
//!
//! Engine commands and locus commands queue until the next tick boundary and
//! are ACKed with the tick of the step that applies them. Speed and pause
//! commands act immediately.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use nbca_core::engine::Command;
use nbca_core::locus::{record_size, Emission, LocusError};
use nbca_core::topology::DockRole;
use nbca_core::{Engine, Frame, HexCoord, Locus, LocusRegistry, StepReport, World};

use crate::codec::{encode, err_code, DockInfo, LockInfo, Message, WorldMeta, VERSION};

/// Outbound frames a session may have queued before it is evicted.
pub const OUTBOX_CAPACITY: usize = 256;
/// Session id used for commands fed in by the host (replay).
pub const HOST_SESSION: u32 = 0;

/// Shared between the runtime and a connection's writer.
#[derive(Debug, Default)]
pub struct SessionControl {
    closing: AtomicBool,
    last_words: Mutex<Option<Vec<u8>>>,
}

impl SessionControl {
    pub fn is_closing(&self) -> bool {
        self.closing.load(Ordering::Acquire)
    }

    /// Frame to send just before closing, if any.
    pub fn take_last_words(&self) -> Option<Vec<u8>> {
        self.last_words.lock().unwrap().take()
    }

    fn close_with(&self, frame: Option<Vec<u8>>) {
        *self.last_words.lock().unwrap() = frame;
        self.closing.store(true, Ordering::Release);
    }
}

/// What connection threads tell the runtime.
#[derive(Debug)]
pub enum Inbound {
    Open { session: u32, outbox: SyncSender<Vec<u8>>, control: Arc<SessionControl> },
    Message { session: u32, msg: Message },
    /// A decode-level problem; `close` for unrecoverable stream errors.
    Violation { session: u32, code: u16, message: String, close: bool },
    Closed { session: u32 },
}

/// Cloneable entry point for connection threads.
#[derive(Clone, Debug)]
pub struct RuntimeHandle {
    tx: Sender<Inbound>,
    next_session: Arc<AtomicU32>,
}

impl RuntimeHandle {
    /// Register a new session; returns its id, outbox receiver and control.
    pub fn open(&self) -> (u32, Receiver<Vec<u8>>, Arc<SessionControl>) {
        let session = self.next_session.fetch_add(1, Ordering::Relaxed);
        let (outbox, rx) = mpsc::sync_channel(OUTBOX_CAPACITY);
        let control = Arc::new(SessionControl::default());
        let _ = self.tx.send(Inbound::Open { session, outbox, control: control.clone() });
        (session, rx, control)
    }

    pub fn send(&self, msg: Inbound) {
        let _ = self.tx.send(msg);
    }
}

struct Session {
    outbox: SyncSender<Vec<u8>>,
    control: Arc<SessionControl>,
    greeted: bool,
    loci: LocusRegistry,
}

#[derive(Clone, Debug)]
struct Pending {
    session: u32,
    command_id: u32,
    command: Command,
}

/// Result of one [`Runtime::step`].
#[derive(Clone, Debug, Default)]
pub struct StepOutcome {
    /// Tick the step started from; the applied commands took effect here.
    pub tick: u64,
    pub applied: Vec<(u32, Command)>,
    pub report: StepReport,
}

pub struct Runtime {
    world: Arc<World>,
    frame: Frame,
    engine: Engine,
    sessions: BTreeMap<u32, Session>,
    tx: Sender<Inbound>,
    rx: Receiver<Inbound>,
    next_session: Arc<AtomicU32>,
    pending: Vec<Pending>,
    /// Commands that act outside the tick (speed, pause), for the log.
    immediate: Vec<(u32, Command)>,
    /// Ticks per second; `None` is unthrottled.
    speed: Option<u32>,
    paused: bool,
    summary_every: u64,
}

impl Runtime {
    pub fn new(world: World, seed: u64) -> Runtime {
        let frame = Frame::initial(&world, seed);
        let (tx, rx) = mpsc::channel();
        Runtime {
            world: Arc::new(world),
            frame,
            engine: Engine::new(),
            sessions: BTreeMap::new(),
            tx,
            rx,
            next_session: Arc::new(AtomicU32::new(HOST_SESSION + 1)),
            pending: Vec::new(),
            immediate: Vec::new(),
            speed: None,
            paused: false,
            summary_every: 100,
        }
    }

    pub fn handle(&self) -> RuntimeHandle {
        RuntimeHandle { tx: self.tx.clone(), next_session: self.next_session.clone() }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn tick(&self) -> u64 {
        self.frame.tick
    }

    pub fn speed(&self) -> Option<u32> {
        self.speed
    }

    pub fn set_speed(&mut self, ticks_per_sec: Option<u32>) {
        self.speed = ticks_per_sec.filter(|&s| s > 0);
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn set_summary_every(&mut self, ticks: u64) {
        self.summary_every = ticks.max(1);
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Queue a command from the host for the next tick boundary.
    pub fn inject(&mut self, command: Command) {
        self.pending.push(Pending { session: HOST_SESSION, command_id: 0, command });
    }

    /// Speed and pause commands handled since the last call, for logging.
    pub fn take_immediate(&mut self) -> Vec<(u32, Command)> {
        std::mem::take(&mut self.immediate)
    }

    /// Handle everything already waiting in the inbox.
    pub fn service(&mut self) {
        while let Ok(msg) = self.rx.try_recv() {
            self.handle_inbound(msg);
        }
    }

    /// Like [`service`](Self::service), but wait up to `timeout` for the
    /// first message.
    pub fn service_for(&mut self, timeout: Duration) {
        match self.rx.recv_timeout(timeout) {
            Ok(msg) => {
                self.handle_inbound(msg);
                self.service();
            }
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {}
        }
    }

    fn world_meta(&self) -> WorldMeta {
        let w = &self.world;
        let (min, max) = w.bounds();
        WorldMeta {
            name: w.name().to_string(),
            slot_capacity: w.slot_capacity(),
            record_size: record_size(w.slot_capacity()) as u16,
            min,
            max,
            tick: self.frame.tick,
            world_hash: w.world_hash(),
            locks: w
                .locks()
                .iter()
                .map(|l| LockInfo {
                    lock_id: l.lock_id,
                    chamber: l.chamber,
                    low_gate: l.low_gate,
                    high_gate: l.high_gate,
                    raise_ticks: l.raise_ticks,
                    lower_ticks: l.lower_ticks,
                    chamber_capacity: l.chamber_capacity,
                    auto_cycle: l.auto_cycle,
                })
                .collect(),
            docks: w
                .docks()
                .iter()
                .map(|d| DockInfo {
                    dock_class: d.dock_class,
                    coord: d.coord,
                    area_id: d.area_id,
                    role: (d.role == DockRole::Delivery) as u8,
                    resource: d.resource.code(),
                })
                .collect(),
        }
    }

    fn send(&mut self, session: u32, msg: &Message) {
        let Some(s) = self.sessions.get(&session) else {
            return;
        };
        match s.outbox.try_send(encode(msg)) {
            Ok(()) => {}
            Err(TrySendError::Full(_)) => {
                warn!("session {session}: outbox full, evicting");
                self.evict(
                    session,
                    Some(Message::Err {
                        command_id: 0,
                        code: err_code::SLOW_CONSUMER,
                        message: "outbound queue overflow".into(),
                    }),
                );
            }
            Err(TrySendError::Disconnected(_)) => {
                self.sessions.remove(&session);
            }
        }
    }

    fn err(&mut self, session: u32, command_id: u32, code: u16, message: impl Into<String>) {
        let message = message.into();
        debug!("session {session}: ERR {code} {message}");
        self.send(session, &Message::Err { command_id, code, message });
    }

    fn evict(&mut self, session: u32, last: Option<Message>) {
        if let Some(s) = self.sessions.remove(&session) {
            s.control.close_with(last.as_ref().map(encode));
        }
    }

    fn handle_inbound(&mut self, inbound: Inbound) {
        match inbound {
            Inbound::Open { session, outbox, control } => {
                info!("session {session} connected");
                self.sessions.insert(
                    session,
                    Session { outbox, control, greeted: false, loci: LocusRegistry::new() },
                );
            }
            Inbound::Closed { session } => {
                info!("session {session} closed");
                self.sessions.remove(&session);
            }
            Inbound::Violation { session, code, message, close } => {
                if close {
                    self.evict(session, Some(Message::Err { command_id: 0, code, message }));
                } else {
                    self.err(session, 0, code, message);
                }
            }
            Inbound::Message { session, msg } => self.handle_message(session, msg),
        }
    }

    fn handle_message(&mut self, session: u32, msg: Message) {
        let Some(s) = self.sessions.get_mut(&session) else {
            return;
        };
        let command_id = msg.command_id().unwrap_or(0);
        if let Message::Hello { version, .. } = msg {
            if version != VERSION {
                let message = format!("protocol version {version} not supported");
                self.evict(
                    session,
                    Some(Message::Err { command_id: 0, code: err_code::BAD_VERSION, message }),
                );
                return;
            }
            s.greeted = true;
            let meta = self.world_meta();
            self.send(session, &Message::WorldMeta(meta));
            return;
        }
        if !s.greeted {
            self.err(session, command_id, err_code::NOT_HELLO, "HELLO required first");
            return;
        }
        let tick = self.frame.tick;
        let command = match msg {
            Message::OperateLock { lock_id, .. } => Command::OperateLock { lock_id },
            Message::LocusCreate { locus_id, center, radius, stride, .. } => Command::CreateLocus {
                locus_id,
                q: center.q,
                r: center.r,
                radius: radius as u32,
                stride,
            },
            Message::LocusMove { locus_id, center, radius, .. } => {
                Command::MoveLocus { locus_id, q: center.q, r: center.r, radius: radius as u32 }
            }
            Message::LocusDestroy { locus_id, .. } => Command::DestroyLocus { locus_id },
            Message::SetSpeed { ticks_per_sec, .. } => {
                self.set_speed(Some(ticks_per_sec));
                let command = Command::SetSpeed { ticks_per_sec };
                self.immediate.push((session, command));
                self.send(session, &Message::Ack { command_id, effective_tick: tick });
                return;
            }
            Message::PauseResume { paused, .. } => {
                self.paused = paused;
                self.immediate.push((session, Command::PauseResume { paused }));
                self.send(session, &Message::Ack { command_id, effective_tick: tick });
                return;
            }
            other => {
                let t = other.msg_type();
                self.err(session, 0, err_code::UNEXPECTED, format!("message type {t:#04x} is server-to-client"));
                return;
            }
        };
        self.pending.push(Pending { session, command_id, command });
    }

    /// Apply one queued command at tick `tick`. Returns the engine command,
    /// if any, or an ERR for the sender.
    fn apply(&mut self, p: &Pending) -> Result<Option<Command>, (u16, String)> {
        let locus_err = |e: LocusError| {
            let code = match e {
                LocusError::DuplicateId(_) => err_code::DUPLICATE_LOCUS,
                LocusError::UnknownId(_) => err_code::UNKNOWN_LOCUS,
                LocusError::RadiusTooLarge(_) => err_code::RADIUS_TOO_LARGE,
                LocusError::BadStride => err_code::BAD_STRIDE,
                _ => err_code::MALFORMED,
            };
            (code, e.to_string())
        };
        match p.command {
            Command::OperateLock { lock_id } => match self.world.lock_index(lock_id) {
                Some(_) => Ok(Some(p.command.clone())),
                None => Err((err_code::UNKNOWN_LOCK, format!("no lock {lock_id}"))),
            },
            Command::CreateLocus { .. } | Command::MoveLocus { .. } | Command::DestroyLocus { .. } => {
                let Some(s) = self.sessions.get_mut(&p.session) else {
                    return Ok(None);
                };
                match p.command {
                    Command::CreateLocus { locus_id, q, r, radius, stride } => s
                        .loci
                        .create(Locus { locus_id, center: HexCoord::new(q, r), radius, stride }),
                    Command::MoveLocus { locus_id, q, r, radius } => {
                        s.loci.relocate(locus_id, HexCoord::new(q, r), radius)
                    }
                    Command::DestroyLocus { locus_id } => s.loci.destroy(locus_id).map(|_| ()),
                    _ => unreachable!(),
                }
                .map(|_| None)
                .map_err(locus_err)
            }
            Command::SetSpeed { ticks_per_sec } => {
                self.set_speed(Some(ticks_per_sec));
                Ok(None)
            }
            Command::PauseResume { paused } => {
                self.paused = paused;
                Ok(None)
            }
        }
    }

    /// Step at the configured speed, servicing sessions in between, until
    /// `on_step` returns false or `stop` is set. Pausing stops the clock but
    /// not servicing.
    pub fn run(&mut self, stop: &AtomicBool, mut on_step: impl FnMut(&mut Runtime, StepOutcome) -> bool) {
        const SLICE: Duration = Duration::from_millis(5);
        let mut anchor = (Instant::now(), self.frame.tick, self.speed);
        loop {
            if stop.load(Ordering::Relaxed) {
                return;
            }
            if self.paused {
                self.service_for(SLICE);
                anchor = (Instant::now(), self.frame.tick, self.speed);
                continue;
            }
            if self.speed != anchor.2 {
                anchor = (Instant::now(), self.frame.tick, self.speed);
            }
            match self.speed {
                None => self.service(),
                Some(tps) => {
                    let due = anchor.0
                        + Duration::from_secs_f64((self.frame.tick + 1 - anchor.1) as f64 / tps as f64);
                    loop {
                        let now = Instant::now();
                        if now >= due || self.paused || self.speed != anchor.2 || stop.load(Ordering::Relaxed) {
                            break;
                        }
                        self.service_for((due - now).min(SLICE));
                    }
                    if self.paused || self.speed != anchor.2 || stop.load(Ordering::Relaxed) {
                        continue;
                    }
                }
            }
            let outcome = self.step();
            if !on_step(self, outcome) {
                return;
            }
        }
    }

    /// Advance one tick: apply queued commands, step the engine, publish.
    pub fn step(&mut self) -> StepOutcome {
        let tick = self.frame.tick;
        let pending = std::mem::take(&mut self.pending);
        let mut engine_cmds = Vec::new();
        let mut applied = Vec::new();
        for p in &pending {
            if p.session != HOST_SESSION && !self.sessions.contains_key(&p.session) {
                continue;
            }
            match self.apply(p) {
                Ok(cmd) => {
                    engine_cmds.extend(cmd);
                    applied.push((p.session, p.command.clone()));
                    if p.session != HOST_SESSION {
                        let ack = Message::Ack { command_id: p.command_id, effective_tick: tick };
                        self.send(p.session, &ack);
                    }
                }
                Err((code, message)) => {
                    if p.session == HOST_SESSION {
                        warn!("host command {:?} rejected: {message}", p.command);
                    } else {
                        self.err(p.session, p.command_id, code, message);
                    }
                }
            }
        }
        let report = self.engine.step(&self.world, &mut self.frame, &engine_cmds);
        self.publish(&report);
        StepOutcome { tick, applied, report }
    }

    fn publish(&mut self, report: &StepReport) {
        let greeted: Vec<u32> =
            self.sessions.iter().filter(|(_, s)| s.greeted).map(|(&id, _)| id).collect();
        for ev in &report.events {
            for &id in &greeted {
                self.send(id, &Message::Event(*ev));
            }
        }
        for &id in &greeted {
            let Some(s) = self.sessions.get_mut(&id) else {
                continue;
            };
            let emissions = s.loci.emit(&self.world, &self.frame);
            for e in emissions {
                let msg = match e {
                    Emission::Snapshot(snap) => Message::Snapshot(snap),
                    Emission::Delta(d) => Message::Delta(d),
                };
                self.send(id, &msg);
            }
        }
        if self.frame.tick % self.summary_every == 0 {
            let msg = Message::ScoreSummary {
                tick: self.frame.tick,
                totals: self.frame.scores.iter().map(|(&a, &t)| (a, t)).collect(),
            };
            for &id in &greeted {
                self.send(id, &msg);
            }
        }
    }
}
