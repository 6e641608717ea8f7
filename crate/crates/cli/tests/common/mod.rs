#![allow(dead_code)]

use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::thread;
use std::time::{Duration, Instant};

use nbca_cli::{run, Listen, RunConfig, Speed, Summary};
use nbca_core::HexCoord;
use nbca_wire::{Client, Message};

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn connect(port: u16) -> Client {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match Client::connect(("127.0.0.1", port)) {
            Ok(c) => return c,
            Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
            Err(e) => panic!("cannot connect: {e}"),
        }
    }
}

/// Run the demo world served on a local port, recording to `log`, while a
/// client issues `commands` commands (mostly lock operations, some locus
/// traffic) and waits for each ACK. Returns the live run's summary.
pub fn record_session(log: &Path, seed: u64, ticks: u64, tps: u32, commands: usize, gap: Duration) -> Summary {
    let port = free_port();
    let mut config = RunConfig::demo(seed, ticks);
    config.speed = Some(Speed::PerSec(tps));
    config.listen = Listen::At(format!("127.0.0.1:{port}"));
    config.record = Some(log.to_path_buf());
    let server = thread::spawn(move || run(&config, &AtomicBool::new(false)).unwrap());

    let mut c = connect(port);
    let meta = c.hello("recorder").unwrap();
    let locks: Vec<u32> = meta.locks.iter().map(|l| l.lock_id).collect();
    for i in 0..commands {
        let command_id = c.command_id();
        let msg = match i % 10 {
            3 => Message::LocusCreate {
                command_id,
                locus_id: i as u32,
                center: HexCoord::new(0, 0),
                radius: 2,
                stride: 4,
            },
            7 => Message::LocusDestroy { command_id, locus_id: i as u32 - 4 },
            _ => Message::OperateLock { command_id, lock_id: locks[i % locks.len()] },
        };
        c.send(&msg).unwrap();
        let reply = c
            .recv_until(Duration::from_secs(10), |m| {
                matches!(m, Message::Ack { command_id: id, .. } | Message::Err { command_id: id, .. } if *id == command_id)
            })
            .unwrap();
        assert!(matches!(reply, Message::Ack { .. }), "command {i}: {reply:?}");
        thread::sleep(gap);
    }
    drop(c);
    server.join().unwrap()
}

pub fn replay(log: &Path, ticks: Option<u64>) -> Result<Summary, nbca_cli::RunError> {
    let mut config = RunConfig::demo(0, 0);
    config.seed = None;
    config.ticks = ticks;
    config.replay = Some(log.to_path_buf());
    run(&config, &AtomicBool::new(false))
}
