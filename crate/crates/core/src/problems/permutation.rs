//! Permutations as `k` big-endian fields of `⌈log₂k⌉` bits.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Bits needed per field for `k` entries; at least one.
pub fn bits_per_entry(k: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < k {
        b += 1;
    }
    b.max(1)
}

/// A (possibly non-bijective) field encoding of a mapping on `{0..k−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationEncoding {
    k: usize,
    bits: BitString,
}

impl PermutationEncoding {
    pub fn from_bits(bits: BitString, k: usize) -> Result<Self> {
        let width = k * bits_per_entry(k);
        if bits.len() != width {
            return Err(Error::Dimension {
                what: "permutation bitstring",
                expected: width,
                got: bits.len(),
            });
        }
        Ok(PermutationEncoding { k, bits })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits_per_entry(&self) -> usize {
        bits_per_entry(self.k)
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }

    pub fn into_bits(self) -> BitString {
        self.bits
    }

    /// Field values; any may be `≥ k` or repeated.
    pub fn decode(&self) -> Vec<usize> {
        decode_permutation(&self.bits, self.k)
    }

    pub fn is_valid(&self) -> bool {
        is_bijection(&self.decode())
    }
}

pub fn is_bijection(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&v| v < p.len() && !std::mem::replace(&mut seen[v], true))
}

pub fn encode_permutation(p: &[usize]) -> Result<PermutationEncoding> {
    if p.len() < 2 {
        return Err(Error::InvalidParam(format!("need k >= 2, got {}", p.len())));
    }
    if !is_bijection(p) {
        return Err(Error::InvalidParam(format!("{p:?} is not a permutation")));
    }
    Ok(PermutationEncoding {
        k: p.len(),
        bits: encode_fields(p, bits_per_entry(p.len())),
    })
}

fn encode_fields(p: &[usize], b: usize) -> BitString {
    let parts: Vec<BitString> = p.iter().map(|&v| BitString::from_index(v as u64, b)).collect();
    BitString::concat(&parts.iter().collect::<Vec<_>>())
}

/// Never fails on a correctly sized input. Trailing bits beyond `k` fields
/// are ignored.
pub fn decode_permutation(bits: &BitString, k: usize) -> Vec<usize> {
    let b = bits_per_entry(k);
    (0..k)
        .map(|i| bits.slice(i * b..(i + 1) * b).to_index() as usize)
        .collect()
}

/// Largest `k` accepted by [`project_to_permutation`] (`2^k` DP states).
pub const MAX_PROJECT_K: usize = 20;

/// Nearest valid permutation in Hamming distance; ties go to the
/// lexicographically smallest sequence.
///
/// The distance splits into per-field costs, so this is a linear assignment
/// solved exactly by a DP over the set of values already used.
pub fn project_to_permutation(bits: &BitString, k: usize) -> Result<PermutationEncoding> {
    let enc = PermutationEncoding::from_bits(bits.clone(), k)?;
    if k > MAX_PROJECT_K {
        return Err(Error::Budget {
            solver: "project_to_permutation",
            size: k,
            limit: MAX_PROJECT_K,
        });
    }
    let b = bits_per_entry(k);
    let fields = enc.decode();
    let cost: Vec<Vec<u32>> = fields
        .iter()
        .map(|&f| (0..k).map(|v| (f ^ v).count_ones()).collect())
        .collect();

    let full = (1usize << k) - 1;
    // rest[mask]: cheapest completion once the values in `mask` are taken by
    // the first popcount(mask) fields.
    let mut rest = vec![u32::MAX; full + 1];
    rest[full] = 0;
    for mask in (0..full).rev() {
        let pos = mask.count_ones() as usize;
        let mut best = u32::MAX;
        for v in 0..k {
            if mask & (1 << v) == 0 {
                best = best.min(cost[pos][v] + rest[mask | (1 << v)]);
            }
        }
        rest[mask] = best;
    }
    let mut mask = 0usize;
    let mut perm = Vec::with_capacity(k);
    for pos in 0..k {
        let target = rest[mask];
        let v = (0..k)
            .find(|&v| mask & (1 << v) == 0 && cost[pos][v] + rest[mask | (1 << v)] == target)
            .expect("dp table is consistent");
        perm.push(v);
        mask |= 1 << v;
    }
    Ok(PermutationEncoding {
        k,
        bits: encode_fields(&perm, b),
    })
}

/// Advances `p` to the next permutation in lexicographic order; returns
/// `false` (leaving `p` sorted ascending) after the last one.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        p.reverse();
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All permutations of `{0..k−1}` in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..k).collect();
    let mut out = vec![p.clone()];
    while next_permutation(&mut p) {
        out.push(p.clone());
    }
    out
}
