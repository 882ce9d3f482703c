//! Greedy Varshamov–Gilbert packing of {−1, +1}^d.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hypothesis::Label;

/// A sign vector of length ≤ 63; bit i set means coordinate i is −1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignVector {
    pub bits: u64,
    pub len: usize,
}

impl SignVector {
    pub fn ones(len: usize) -> Self {
        SignVector { bits: 0, len }
    }

    pub fn get(&self, i: usize) -> Label {
        Label::from_bool(self.bits >> i & 1 == 0)
    }

    pub fn labels(&self) -> Vec<Label> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn hamming(&self, other: &SignVector) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

pub const MAX_PACKING_DIM: usize = 63;

/// Scans {−1,+1}^d in lexicographic order from (1,…,1), admitting a vector
/// when it is at Hamming distance ≥ ⌈d/8⌉ from every admitted one. The scan
/// stops once M ≥ 2^{d/8} vectors besides (1,…,1) are admitted.
pub fn vg_packing(d: usize) -> Result<Vec<SignVector>> {
    if d < 8 {
        return Err(invalid(format!("packing needs d >= 8, got {d}")));
    }
    if d > MAX_PACKING_DIM {
        return Err(invalid(format!("packing supports d <= {MAX_PACKING_DIM}, got {d}")));
    }
    let min_dist = d.div_ceil(8) as u32;
    let target = 2f64.powf(d as f64 / 8.0);
    let mut out = vec![SignVector::ones(d)];
    // coordinate 0 is the most significant position of the scan
    let reverse = |m: u64| m.reverse_bits() >> (64 - d);
    for m in 1u64..(1u64 << d) {
        if (out.len() - 1) as f64 >= target {
            break;
        }
        let v = SignVector { bits: reverse(m), len: d };
        if out.iter().all(|u| u.hamming(&v) >= min_dist) {
            out.push(v);
        }
    }
    assert!((out.len() - 1) as f64 >= target, "greedy packing fell short of 2^(d/8)");
    Ok(out)
}
