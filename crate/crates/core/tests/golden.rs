//! Pinned digests for the bundled demo world. A change here means the
//! simulation rules or the world file changed.

use nbca_core::{demo_world, Engine, Frame};
use nbca_testkit::reference_frame_hash;

#[test]
fn demo_hashes() {
    let w = demo_world();
    let mut f = Frame::initial(&w, 42);
    assert_eq!(f.hash(&w), reference_frame_hash(&w, &f));
    assert_eq!(f.hash(&w), 0x03f3_3ed0_2da3_0ae2);
    let mut e = Engine::new();
    for _ in 0..1000 {
        e.step(&w, &mut f, &[]);
    }
    assert_eq!(f.hash(&w), reference_frame_hash(&w, &f));
    assert_eq!(f.hash(&w), 0xf049_484b_aa9a_7fc0);
    assert_eq!(w.world_hash(), 0x9d45_8e2a_ae1d_2c77);
}

#[test]
fn digest_matches_reference_on_random_worlds() {
    use nbca_core::synth::{random_world, RandomWorldOptions};
    for seed in 0..30 {
        let w = random_world(seed, &RandomWorldOptions::default());
        let mut f = Frame::initial(&w, seed);
        let mut e = Engine::new();
        for _ in 0..60 {
            e.step(&w, &mut f, &[]);
            assert_eq!(f.hash(&w), reference_frame_hash(&w, &f));
        }
    }
}

#[test]
fn world_file_round_trips() {
    let w = demo_world();
    let again = nbca_core::World::from_json(&w.to_json()).unwrap();
    assert_eq!(again, w);
    assert_eq!(again.world_hash(), w.world_hash());
}
