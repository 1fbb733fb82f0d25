//! Seeded random environment on the implicit edges.
//!
//! Each edge `(x, dir_index)` receives one uniform draw `U_e ∈ [0, 1)` computed
//! by hashing `(seed, x, dir_index)`. The edge is open iff `U_e < p`, and its
//! passage time is `0` when open and `1` otherwise. One draw therefore couples
//! every `p`: raising `p` only opens edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Vertex;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stafford's "mix13" 64-bit finalizer (the SplitMix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GAMMA) ^ word)
}

/// Seed of replica `r` of an experiment seeded with `seed`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    absorb(absorb(mix64(seed ^ 0x5EED_5EED_5EED_5EED), replica), 0x7265_706C)
}

/// Parameters of the random field: seed and edge-opening probability `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub seed: u64,
    pub p: f64,
}

/// An implicit edge: tail vertex and index into the graph's direction list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeKey {
    pub x: Vertex,
    pub dir_index: usize,
}

impl FieldParams {
    pub fn new(seed: u64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
        }
        Ok(Self { seed, p })
    }

    /// The same seed at a different opening probability (coupled field).
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.seed, p)
    }

    pub fn replica(&self, r: u64) -> Self {
        Self {
            seed: replica_seed(self.seed, r),
            p: self.p,
        }
    }

    pub fn edge_uniform(&self, e: &EdgeKey) -> f64 {
        Field::new(self).uniform(&e.x, e.dir_index)
    }

    pub fn edge_open(&self, e: &EdgeKey) -> bool {
        Field::new(self).is_open(&e.x, e.dir_index)
    }

    /// `0` iff the edge is open.
    pub fn edge_time(&self, e: &EdgeKey) -> u32 {
        Field::new(self).time(&e.x, e.dir_index)
    }
}

/// Precomputed evaluator for one `FieldParams`.
#[derive(Clone, Copy, Debug)]
pub struct Field {
    key: u64,
    /// Edge open iff its 53-bit draw `k` satisfies `k < threshold`,
    /// i.e. `k / 2^53 < p`.
    threshold: u64,
}

impl Field {
    pub fn new(params: &FieldParams) -> Self {
        let scaled = params.p * (1u64 << 53) as f64;
        Self {
            key: mix64(params.seed ^ 0xD1B5_4A32_D192_ED03),
            threshold: scaled.ceil() as u64,
        }
    }

    #[inline]
    fn bits53(&self, x: &Vertex, dir_index: usize) -> u64 {
        let mut h = self.key;
        for &c in x.coords() {
            h = absorb(h, c as u64);
        }
        h = absorb(h, dir_index as u64 ^ ((x.dim() as u64) << 32));
        h >> 11
    }

    #[inline]
    pub fn uniform(&self, x: &Vertex, dir_index: usize) -> f64 {
        self.bits53(x, dir_index) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn is_open(&self, x: &Vertex, dir_index: usize) -> bool {
        self.bits53(x, dir_index) < self.threshold
    }

    #[inline]
    pub fn time(&self, x: &Vertex, dir_index: usize) -> u32 {
        u32::from(!self.is_open(x, dir_index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(i: i64, d: usize) -> EdgeKey {
        EdgeKey {
            x: Vertex::new(&[i, -3 * i]),
            dir_index: d,
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = FieldParams::new(1, 0.5).unwrap();
        let b = FieldParams::new(2, 0.5).unwrap();
        let e = edge(17, 2);
        assert_eq!(a.edge_uniform(&e), a.edge_uniform(&e));
        assert_ne!(a.edge_uniform(&e), b.edge_uniform(&e));
    }

    #[test]
    fn extremes_are_exact() {
        let closed = FieldParams::new(9, 0.0).unwrap();
        let open = FieldParams::new(9, 1.0).unwrap();
        for i in -200..200 {
            for d in 0..4 {
                let e = edge(i, d);
                assert!(!closed.edge_open(&e));
                assert!(open.edge_open(&e));
                assert_eq!(open.edge_time(&e), 0);
                assert_eq!(closed.edge_time(&e), 1);
            }
        }
    }

    #[test]
    fn open_agrees_with_uniform_threshold() {
        for &p in &[0.1, 0.37, 0.51, 0.9] {
            let f = FieldParams::new(5, p).unwrap();
            for i in 0..5000 {
                let e = edge(i, (i % 3) as usize);
                assert_eq!(f.edge_open(&e), f.edge_uniform(&e) < p);
                assert_eq!(f.edge_time(&e), u32::from(!f.edge_open(&e)));
            }
        }
    }

    #[test]
    fn rejects_bad_p() {
        assert!(FieldParams::new(0, -0.1).is_err());
        assert!(FieldParams::new(0, 1.5).is_err());
        assert!(FieldParams::new(0, f64::NAN).is_err());
    }

    #[test]
    fn replica_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|r| replica_seed(3, r)).collect();
        assert_eq!(seeds.len(), 10_000);
    }
}
