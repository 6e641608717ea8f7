//! Axial hex coordinates (pointy-top).
//!
//! Direction indices 0..5 follow [`DIRECTIONS`] and are shared by routing
//! tables, the engine and the wire format.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The six neighbor offsets, indexed by direction.
pub const DIRECTIONS: [HexCoord; 6] = [
    HexCoord::new(1, 0),
    HexCoord::new(1, -1),
    HexCoord::new(0, -1),
    HexCoord::new(-1, 0),
    HexCoord::new(-1, 1),
    HexCoord::new(0, 1),
];

/// Largest locus radius a consumer may request.
pub const MAX_RADIUS: u32 = 16;

/// A cell address on the hex lattice. Ordering is `(q, r)` lexicographic,
/// which is the canonical cell order used for hashing and extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HexCoord {
    pub q: i32,
    pub r: i32,
}

impl HexCoord {
    pub const fn new(q: i32, r: i32) -> Self {
        Self { q, r }
    }

    pub fn neighbor(self, dir: usize) -> HexCoord {
        self + DIRECTIONS[dir]
    }

    pub fn neighbors(self) -> [HexCoord; 6] {
        DIRECTIONS.map(|d| self + d)
    }

    /// Direction index `d` such that `self.neighbor(d) == other`, if adjacent.
    pub fn direction_to(self, other: HexCoord) -> Option<usize> {
        let delta = other - self;
        DIRECTIONS.iter().position(|&d| d == delta)
    }

    pub fn distance(self, other: HexCoord) -> u32 {
        hex_distance(self, other)
    }

    /// True when both components fit the 16-bit wire encoding.
    pub fn fits_i16(self) -> bool {
        i16::try_from(self.q).is_ok() && i16::try_from(self.r).is_ok()
    }
}

impl std::ops::Add for HexCoord {
    type Output = HexCoord;
    fn add(self, rhs: HexCoord) -> HexCoord {
        HexCoord::new(self.q + rhs.q, self.r + rhs.r)
    }
}

impl std::ops::Sub for HexCoord {
    type Output = HexCoord;
    fn sub(self, rhs: HexCoord) -> HexCoord {
        HexCoord::new(self.q - rhs.q, self.r - rhs.r)
    }
}

impl fmt::Display for HexCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.r)
    }
}

impl From<(i32, i32)> for HexCoord {
    fn from((q, r): (i32, i32)) -> Self {
        HexCoord::new(q, r)
    }
}

/// The six neighbors of `c` in direction order.
pub fn neighbors(c: HexCoord) -> [HexCoord; 6] {
    c.neighbors()
}

/// Minimal hop count between two cells on the unbounded lattice.
pub fn hex_distance(a: HexCoord, b: HexCoord) -> u32 {
    let dq = (a.q - b.q) as i64;
    let dr = (a.r - b.r) as i64;
    ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
}

/// Number of cells in a disk of the given radius.
pub fn disk_size(radius: u32) -> usize {
    let r = radius as usize;
    1 + 3 * r * (r + 1)
}

/// All coordinates within `radius` of `center`, in `(q, r)` order.
pub fn hex_disk(center: HexCoord, radius: u32) -> Vec<HexCoord> {
    let mut out = Vec::with_capacity(disk_size(radius));
    let rad = radius as i32;
    for dq in -rad..=rad {
        let lo = (-rad).max(-dq - rad);
        let hi = rad.min(-dq + rad);
        for dr in lo..=hi {
            out.push(HexCoord::new(center.q + dq, center.r + dr));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_neighbors_in_direction_order() {
        let got = neighbors(HexCoord::new(0, 0));
        let want = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)].map(HexCoord::from);
        assert_eq!(got, want);
    }

    #[test]
    fn neighbors_translate() {
        let c = HexCoord::new(2, -1);
        for (n, d) in neighbors(c).iter().zip(DIRECTIONS) {
            assert_eq!(*n, c + d);
        }
    }

    #[test]
    fn distance_basics() {
        let a = HexCoord::new(3, -7);
        assert_eq!(hex_distance(a, a), 0);
        assert_eq!(hex_distance(HexCoord::new(0, 0), HexCoord::new(1, -1)), 1);
        assert_eq!(hex_distance(HexCoord::new(0, 0), HexCoord::new(2, 2)), 4);
    }

    #[test]
    fn disk_sizes() {
        let c = HexCoord::new(5, 5);
        assert_eq!(hex_disk(c, 0), vec![c]);
        let mut one = hex_disk(c, 1);
        one.retain(|&x| x != c);
        let mut ns = neighbors(c).to_vec();
        ns.sort();
        assert_eq!(one, ns);
        assert_eq!(hex_disk(c, 8).len(), 217);
    }

    #[test]
    fn disk_is_sorted() {
        let d = hex_disk(HexCoord::new(-3, 4), 5);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn direction_to_roundtrip() {
        let c = HexCoord::new(4, -2);
        for d in 0..6 {
            assert_eq!(c.direction_to(c.neighbor(d)), Some(d));
        }
        assert_eq!(c.direction_to(c), None);
    }
}
