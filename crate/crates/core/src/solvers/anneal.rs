use std::collections::HashMap;

use rand::Rng as _;
use rayon::prelude::*;

use super::{QuboSampler, Sample, SolverResult};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::rng;
use crate::scalar::Scalar;

/// Inverse-temperature range of the annealing schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaRange {
    /// `β_hot = ln 2 / ΔE_max`, `β_cold = ln 100 / ΔE_min`, with the single-flip
    /// energy scales estimated from the couplings.
    Auto,
    Fixed { hot: f64, cold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaParams {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta: BetaRange,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            num_reads: 100,
            sweeps: 1000,
            beta: BetaRange::Auto,
            seed: 0,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::InvalidParam("num_reads must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidParam("sweeps must be at least 1".into()));
        }
        if let BetaRange::Fixed { hot, cold } = self.beta {
            if !(hot > 0.0 && cold > 0.0 && hot < cold) {
                return Err(Error::InvalidParam(format!(
                    "need 0 < beta_hot < beta_cold, got {hot} and {cold}"
                )));
            }
        }
        Ok(())
    }
}

/// Largest and smallest nonzero single-flip energy change bounds of `q`.
fn flip_energy_scales<T: Scalar>(q: &QuboMatrix<T>) -> Option<(f64, f64)> {
    let n = q.n();
    let mut max_delta = 0.0f64;
    let mut min_delta = f64::INFINITY;
    for i in 0..n {
        let mut row_abs = 0.0;
        for j in 0..n {
            let v = q.get(i, j).to_f64_lossy().abs();
            let contrib = if i == j { v } else { 2.0 * v };
            row_abs += contrib;
            if contrib > 0.0 {
                min_delta = min_delta.min(contrib);
            }
        }
        max_delta = max_delta.max(row_abs);
    }
    (max_delta > 0.0).then_some((max_delta, min_delta))
}

pub(crate) fn resolve_betas<T: Scalar>(q: &QuboMatrix<T>, beta: BetaRange) -> (f64, f64) {
    match beta {
        BetaRange::Fixed { hot, cold } => (hot, cold),
        BetaRange::Auto => match flip_energy_scales(q) {
            Some((max_d, min_d)) => {
                let hot = 2f64.ln() / max_d;
                let cold = 100f64.ln() / min_d;
                if hot < cold {
                    (hot, cold)
                } else {
                    (hot, hot * 10.0)
                }
            }
            None => (0.1, 1.0),
        },
    }
}

/// `sweeps` inverse temperatures spaced geometrically from `hot` to `cold`.
pub fn geometric_schedule(hot: f64, cold: f64, sweeps: usize) -> Vec<f64> {
    if sweeps <= 1 {
        return vec![hot];
    }
    let ratio = (cold / hot).ln() / (sweeps - 1) as f64;
    (0..sweeps).map(|k| hot * (ratio * k as f64).exp()).collect()
}

fn anneal_once<T: Scalar>(q: &QuboMatrix<T>, schedule: &[f64], seed: u64) -> BitString {
    let n = q.n();
    let mut r = rng::from_seed(seed);
    let mut x: Vec<bool> = (0..n).map(|_| r.gen::<bool>()).collect();
    let mut field: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && x[j])
                .map(|j| q.get(i, j).to_f64_lossy())
                .sum()
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| q.values().row(i).iter().map(|v| v.to_f64_lossy()).collect())
        .collect();

    for &beta in schedule {
        for pos in 0..n {
            let row = &rows[pos];
            let on = row[pos] + 2.0 * field[pos];
            let delta = if x[pos] { -on } else { on };
            let accept = delta <= 0.0 || r.gen::<f64>() < (-beta * delta).exp();
            if accept {
                let sign = if x[pos] { -1.0 } else { 1.0 };
                for (i, f) in field.iter_mut().enumerate() {
                    if i != pos {
                        *f += sign * row[i];
                    }
                }
                x[pos] = !x[pos];
            }
        }
    }
    BitString::from_bools(x)
}

/// Multi-restart single-flip Metropolis annealing.
///
/// Read `r` uses the random stream `child_seed(seed, r)`, so the result does
/// not depend on how reads are spread over threads. If every read lands on the
/// same state, one extra read with doubled sweeps looks for a second state.
pub fn simulated_anneal<T: Scalar>(q: &QuboMatrix<T>, params: &SaParams) -> Result<SolverResult<T>> {
    params.validate()?;
    let (hot, cold) = resolve_betas(q, params.beta);
    let schedule = geometric_schedule(hot, cold, params.sweeps);

    let finals: Vec<BitString> = (0..params.num_reads)
        .into_par_iter()
        .map(|r| anneal_once(q, &schedule, rng::child_seed(params.seed, r as u64)))
        .collect();

    let mut counts: HashMap<BitString, usize> = HashMap::new();
    for b in finals {
        *counts.entry(b).or_default() += 1;
    }
    if counts.len() < 2 {
        let long = geometric_schedule(hot, cold, params.sweeps * 2);
        let extra = anneal_once(q, &long, rng::child_seed(params.seed, params.num_reads as u64));
        *counts.entry(extra).or_default() += 1;
    }

    let samples = counts
        .into_iter()
        .map(|(bits, count)| Sample {
            energy: q.energy_unchecked(&bits),
            bits,
            count,
        })
        .collect();
    Ok(SolverResult::from_samples(samples))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SimulatedAnnealer {
    pub params: SaParams,
}

impl<T: Scalar> QuboSampler<T> for SimulatedAnnealer {
    fn sample(&self, qubo: &QuboMatrix<T>, seed: u64) -> Result<SolverResult<T>> {
        simulated_anneal(qubo, &SaParams { seed, ..self.params })
    }
}
