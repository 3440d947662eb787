//! QUBO solvers and statistics over their sample sets.

mod anneal;
mod exhaustive;
mod stats;

use std::cmp::Ordering;

pub use anneal::{geometric_schedule, simulated_anneal, BetaRange, SaParams, SimulatedAnnealer};
pub use exhaustive::{
    exhaustive_solve, exhaustive_solve_with, ExhaustiveOptions, ExhaustiveSolver, MAX_EXHAUSTIVE_N,
};
pub use stats::{hamming_histogram, second_best_ratio, success_probability};

use crate::bits::BitString;
use crate::error::Result;
use crate::qubo::QuboMatrix;
use crate::scalar::Scalar;

/// A distinct solution together with how many reads returned it.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub bits: BitString,
    pub energy: T,
    pub count: usize,
}

/// Ranked, deduplicated samples with best and second-best distinct solutions.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult<T> {
    samples: Vec<Sample<T>>,
}

/// Energy first, then lexicographically smallest bitstring.
pub(crate) fn rank<T: Scalar>(a: (&T, &BitString), b: (&T, &BitString)) -> Ordering {
    a.0.partial_cmp(b.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

impl<T: Scalar> SolverResult<T> {
    /// Sorts and merges duplicate bitstrings. Panics on an empty sample list.
    pub fn from_samples(mut samples: Vec<Sample<T>>) -> Self {
        assert!(!samples.is_empty(), "solver produced no samples");
        samples.sort_by(|a, b| a.bits.cmp(&b.bits));
        let mut merged: Vec<Sample<T>> = Vec::with_capacity(samples.len());
        for s in samples {
            match merged.last_mut() {
                Some(last) if last.bits == s.bits => last.count += s.count,
                _ => merged.push(s),
            }
        }
        merged.sort_by(|a, b| rank((&a.energy, &a.bits), (&b.energy, &b.bits)));
        SolverResult { samples: merged }
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn best(&self) -> &BitString {
        &self.samples[0].bits
    }

    pub fn best_energy(&self) -> T {
        self.samples[0].energy
    }

    pub fn second_best(&self) -> Option<&BitString> {
        self.samples.get(1).map(|s| &s.bits)
    }

    pub fn second_energy(&self) -> Option<T> {
        self.samples.get(1).map(|s| s.energy)
    }

    pub fn total_reads(&self) -> usize {
        self.samples.iter().map(|s| s.count).sum()
    }
}

/// Anything that returns low-energy samples of a QUBO: the built-in solvers, or
/// an adapter to external annealing hardware.
pub trait QuboSampler<T: Scalar>: Sync {
    /// `seed` selects the random stream for stochastic samplers.
    fn sample(&self, qubo: &QuboMatrix<T>, seed: u64) -> Result<SolverResult<T>>;
}
