mod common;

use std::fs;
use std::process::Command as Proc;
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use nbca_cli::replay::{ReplayError, ReplayLog};
use nbca_cli::{run, RunConfig, RunError, Speed};
use nbca_core::{demo_world, Engine, Frame};

const GOLDEN: &str = include_str!("golden/demo-seed42-t1000.txt");

fn no_stop() -> AtomicBool {
    AtomicBool::new(false)
}

#[test]
fn demo_summary_matches_golden_file() {
    let s = run(&RunConfig::demo(42, 1000), &no_stop()).unwrap();
    assert_eq!(s.stable_lines().join("\n") + "\n", GOLDEN);
}

#[test]
fn run_agrees_with_a_bare_engine_loop() {
    let world = demo_world();
    let mut frame = Frame::initial(&world, 42);
    let mut engine = Engine::new();
    for _ in 0..1000 {
        engine.step(&world, &mut frame, &[]);
    }
    let s = run(&RunConfig::demo(42, 1000), &no_stop()).unwrap();
    assert_eq!(s.final_hash, frame.hash(&world));
    assert_eq!(s.final_tick, 1000);
}

fn binary_summary(args: &[&str]) -> (i32, String, String) {
    let out = Proc::new(env!("CARGO_BIN_EXE_nbca")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn value<'a>(summary: &'a str, key: &str) -> &'a str {
    summary
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {summary}"))
}

#[test]
fn binary_is_deterministic_and_parseable() {
    let args = ["--demo", "--seed", "42", "--ticks", "1000", "--speed", "max"];
    let (code_a, a, _) = binary_summary(&args);
    let (code_b, b, _) = binary_summary(&args);
    assert_eq!((code_a, code_b), (0, 0));
    assert_eq!(value(&a, "final_hash"), "0xf049484baa9a7fc0");
    assert_eq!(value(&a, "final_hash"), value(&b, "final_hash"));
    for line in a.lines() {
        let (k, v) = line.split_once('=').expect("key=value");
        assert!(!k.is_empty() && !v.is_empty() && !k.contains(' '), "{line}");
    }
    assert!(value(&a, "ticks_per_sec").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let (code, _, err) = binary_summary(&["--world", "/nonexistent/world.json", "--ticks", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("cannot read world"), "{err}");
    let (code, _, _) = binary_summary(&["--demo", "--record", "a", "--replay", "b"]);
    assert_eq!(code, 2, "record and replay are exclusive");
    let (code, _, _) = binary_summary(&["--demo", "--speed", "fast"]);
    assert_eq!(code, 2);
    let (code, _, err) = binary_summary(&["--ticks", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("--demo"), "{err}");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"name":"x","slot_capacity":2,"cells":[]}"#).unwrap();
    let (code, _, err) = binary_summary(&["--world", bad.to_str().unwrap(), "--ticks", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("cannot load world"), "{err}");
}

#[test]
fn speed_ten_paces_fifty_ticks_over_five_seconds() {
    let mut c = RunConfig::demo(1, 50);
    c.speed = Some(Speed::PerSec(10));
    let t = Instant::now();
    let s = run(&c, &no_stop()).unwrap();
    let wall = t.elapsed().as_secs_f64();
    assert_eq!(s.final_tick, 50);
    assert!((4.5..=5.5).contains(&wall), "took {wall:.3} s");
}

#[test]
fn empty_log_replays_to_the_same_hash() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    let mut c = RunConfig::demo(9, 700);
    c.record = Some(log.clone());
    let live = run(&c, &no_stop()).unwrap();
    let parsed = ReplayLog::read(&log).unwrap();
    assert!(parsed.entries.is_empty());
    assert_eq!(parsed.header.seed, 9);
    let again = common::replay(&log, None).unwrap();
    assert_eq!(again.final_tick, 700);
    assert_eq!(again.final_hash, live.final_hash);
    assert_eq!(again.replay_match, Some(true));
}

#[test]
fn twenty_lock_operations_over_tcp_replay_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    // Sixteen lock operations plus a couple of locus create/destroy pairs.
    let live = common::record_session(&log, 5, 600, 100, 20, Duration::from_millis(30));
    let parsed = ReplayLog::read(&log).unwrap();
    assert_eq!(parsed.entries.len(), 20);
    assert_eq!(live.commands, 20);
    let again = common::replay(&log, None).unwrap();
    assert_eq!(again.final_hash, live.final_hash);
    assert_eq!(again.replay_match, Some(true));

    // The demo's auto-cycling locks settle back after a while, so look
    // just after the last command rather than at the end.
    let probe = parsed.entries.last().unwrap().tick + 2;
    let with = common::replay(&log, Some(probe)).unwrap();
    let bare = run(&RunConfig::demo(5, probe), &no_stop()).unwrap();
    assert_ne!(bare.final_hash, with.final_hash);
}

#[test]
fn shifting_one_command_by_one_tick_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("session.jsonl");
    common::record_session(&log, 6, 400, 100, 10, Duration::from_millis(30));
    let text = fs::read_to_string(&log).unwrap();
    let parsed = ReplayLog::read(&log).unwrap();
    let shifted = dir.path().join("shifted.jsonl");
    // A latch set while the lock is already moving is a no-op, so not every
    // shift shows; the first one that lands on an open lock must.
    let mut seen = 0;
    for entry in &parsed.entries {
        if !matches!(entry.command, nbca_core::Command::OperateLock { .. }) {
            continue;
        }
        let original_line = serde_json::to_string(entry).unwrap();
        let mut moved = entry.clone();
        moved.tick += 1;
        let moved_line = serde_json::to_string(&moved).unwrap();
        let edited: Vec<String> = text
            .lines()
            .filter(|l| !l.starts_with("{\"end\""))
            .map(|l| if l == original_line { moved_line.clone() } else { l.to_string() })
            .collect();
        fs::write(&shifted, edited.join("\n") + "\n").unwrap();
        let probe = Some(entry.tick + 3);
        let a = common::replay(&log, probe).unwrap();
        let b = common::replay(&shifted, probe).unwrap();
        if a.final_hash != b.final_hash {
            seen += 1;
        }
    }
    assert!(seen >= 1, "no shifted lock command changed the hash");
}

#[test]
fn tampered_final_hash_is_reported_as_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut c = RunConfig::demo(4, 120);
    c.record = Some(log.clone());
    let live = run(&c, &no_stop()).unwrap();
    let text = fs::read_to_string(&log).unwrap();
    let real = nbca_cli::replay::hex64(live.final_hash);
    let fake = nbca_cli::replay::hex64(live.final_hash ^ 1);
    fs::write(&log, text.replace(&real, &fake)).unwrap();
    assert!(matches!(common::replay(&log, None), Err(RunError::Diverged { .. })));
    // A shorter replay has nothing to check against.
    assert_eq!(common::replay(&log, Some(60)).unwrap().replay_match, None);
}

#[test]
fn replay_refuses_other_worlds_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut c = RunConfig::demo(3, 10);
    c.record = Some(log.clone());
    run(&c, &no_stop()).unwrap();

    // Same log against a modified world.
    let mut world: serde_json::Value = serde_json::from_str(&demo_world().to_json()).unwrap();
    world["name"] = "renamed".into();
    let world_path = dir.path().join("world.json");
    fs::write(&world_path, world.to_string()).unwrap();
    let mut r = RunConfig::demo(3, 10);
    r.demo = false;
    r.world = Some(world_path);
    r.replay = Some(log.clone());
    assert!(matches!(run(&r, &no_stop()), Err(RunError::Replay(ReplayError::WorldMismatch { .. }))));

    let text = fs::read_to_string(&log).unwrap().replace("\"version\":1", "\"version\":7");
    fs::write(&log, text).unwrap();
    assert!(matches!(common::replay(&log, None), Err(RunError::Replay(ReplayError::VersionMismatch(7)))));
}

#[test]
fn replay_seed_comes_from_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut c = RunConfig::demo(11, 50);
    c.record = Some(log.clone());
    run(&c, &no_stop()).unwrap();
    let mut r = RunConfig::demo(12, 50);
    r.replay = Some(log);
    assert!(matches!(run(&r, &no_stop()), Err(RunError::SeedMismatch { logged: 11, given: 12 })));
}
