use rayon::prelude::*;

use super::{rank, QuboSampler, Sample, SolverResult};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::scalar::Scalar;

/// Largest `n` accepted by the enumeration (2²⁶ states).
pub const MAX_EXHAUSTIVE_N: usize = 26;

#[derive(Clone, Copy, Debug)]
pub struct ExhaustiveOptions {
    /// Number of lowest-energy distinct states to report (at least 2).
    pub keep: usize,
    /// Number of leading bits fixed per parallel chunk; `None` picks one from
    /// the problem size. `Some(0)` is a purely sequential scan.
    pub prefix_bits: Option<usize>,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            keep: 2,
            prefix_bits: None,
        }
    }
}

/// Exact minimizer by enumeration of all `2ⁿ` states.
pub fn exhaustive_solve<T: Scalar>(q: &QuboMatrix<T>) -> Result<SolverResult<T>> {
    exhaustive_solve_with(q, ExhaustiveOptions::default())
}

pub fn exhaustive_solve_with<T: Scalar>(
    q: &QuboMatrix<T>,
    opts: ExhaustiveOptions,
) -> Result<SolverResult<T>> {
    let n = q.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::Budget {
            solver: "exhaustive search",
            size: n,
            limit: MAX_EXHAUSTIVE_N,
        });
    }
    let keep = opts.keep.max(2);
    let prefix = opts
        .prefix_bits
        .unwrap_or(if n >= 14 { 6 } else { 0 })
        .min(n);
    let suffix = n - prefix;

    let scan = |chunk: u64| scan_chunk(q, chunk << suffix, suffix, keep + 2);
    let candidates: Vec<(T, u64)> = if prefix == 0 {
        scan(0)
    } else {
        (0..1u64 << prefix)
            .into_par_iter()
            .flat_map_iter(scan)
            .collect()
    };

    // Chunk-local energies accumulate rounding along different flip paths, so
    // the winners are re-ranked on a path-independent evaluation.
    let mut exact: Vec<(T, BitString)> = candidates
        .into_iter()
        .map(|(_, idx)| (q.energy_of_index(idx), BitString::from_index(idx, n)))
        .collect();
    exact.sort_by(|a, b| rank((&a.0, &a.1), (&b.0, &b.1)));
    exact.dedup_by(|a, b| a.1 == b.1);
    exact.truncate(keep);

    Ok(SolverResult::from_samples(
        exact
            .into_iter()
            .map(|(energy, bits)| Sample {
                bits,
                energy,
                count: 1,
            })
            .collect(),
    ))
}

/// Gray-code walk over the low `suffix` bits of `base`, keeping the `keep`
/// lowest `(energy, index)` pairs.
fn scan_chunk<T: Scalar>(q: &QuboMatrix<T>, base: u64, suffix: usize, keep: usize) -> Vec<(T, u64)> {
    let n = q.n();
    let two = T::from_f64_lossy(2.0);
    let mut x: Vec<bool> = (0..n).map(|i| (base >> (n - 1 - i)) & 1 == 1).collect();
    // field[i] = Σ_{j≠i} A_ij x_j
    let mut field: Vec<T> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && x[j])
                .map(|j| q.get(i, j))
                .sum()
        })
        .collect();
    let mut energy = q.energy_of_index(base);
    let mut index = base;
    let mut best: Vec<(T, u64)> = Vec::with_capacity(keep + 1);
    push_top(&mut best, (energy, index), keep);

    for k in 1u64..(1u64 << suffix) {
        let bit = k.trailing_zeros() as usize;
        let pos = n - 1 - bit;
        let row = q.values().row(pos);
        let delta = row[pos] + two * field[pos];
        let turning_on = !x[pos];
        if turning_on {
            energy += delta;
            for (i, f) in field.iter_mut().enumerate() {
                if i != pos {
                    *f += row[i];
                }
            }
        } else {
            energy -= delta;
            for (i, f) in field.iter_mut().enumerate() {
                if i != pos {
                    *f -= row[i];
                }
            }
        }
        x[pos] = turning_on;
        index ^= 1 << bit;
        push_top(&mut best, (energy, index), keep);
    }
    best
}

fn push_top<T: Scalar>(top: &mut Vec<(T, u64)>, cand: (T, u64), keep: usize) {
    let before = |a: &(T, u64), b: &(T, u64)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
    if top.len() == keep && !before(&cand, top.last().unwrap()) {
        return;
    }
    let pos = top.iter().position(|t| before(&cand, t)).unwrap_or(top.len());
    top.insert(pos, cand);
    top.truncate(keep);
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExhaustiveSolver {
    pub options: ExhaustiveOptions,
}

impl<T: Scalar> QuboSampler<T> for ExhaustiveSolver {
    fn sample(&self, qubo: &QuboMatrix<T>, _seed: u64) -> Result<SolverResult<T>> {
        exhaustive_solve_with(qubo, self.options)
    }
}
