use super::SolverResult;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Second-best energy of `a` relative to that of `b`, in percent.
///
/// With negative second-best energies (the usual case near a learnt optimum)
/// a value below 100 means `a` found a worse (higher) second-best state.
pub fn second_best_ratio<T: Scalar>(a: &SolverResult<T>, b: &SolverResult<T>) -> Result<f64> {
    let ea = a.second_energy().ok_or(Error::MissingSecondBest)?.to_f64_lossy();
    let eb = b.second_energy().ok_or(Error::MissingSecondBest)?.to_f64_lossy();
    if eb == 0.0 {
        if ea == 0.0 {
            return Ok(100.0);
        }
        return Err(Error::InvalidParam(
            "reference second-best energy is zero".into(),
        ));
    }
    Ok(100.0 * ea / eb)
}

/// Fraction of reads whose energy is within 1e-9 of `optimum_energy`.
pub fn success_probability<T: Scalar>(result: &SolverResult<T>, optimum_energy: T) -> f64 {
    let total = result.total_reads();
    if total == 0 {
        return 0.0;
    }
    let tol = 1e-9;
    let hits: usize = result
        .samples()
        .iter()
        .filter(|s| (s.energy.to_f64_lossy() - optimum_energy.to_f64_lossy()).abs() <= tol)
        .map(|s| s.count)
        .sum();
    hits as f64 / total as f64
}

/// `hist[d]` counts the pairs at Hamming distance `d`.
pub fn hamming_histogram(solutions: &[BitString], truths: &[BitString]) -> Result<Vec<usize>> {
    if solutions.len() != truths.len() {
        return Err(Error::Dimension {
            what: "paired solution count",
            expected: truths.len(),
            got: solutions.len(),
        });
    }
    let Some(first) = truths.first() else {
        return Ok(Vec::new());
    };
    let mut hist = vec![0usize; first.len() + 1];
    for (s, t) in solutions.iter().zip(truths) {
        if t.len() != first.len() {
            return Err(Error::Dimension {
                what: "bitstring length",
                expected: first.len(),
                got: t.len(),
            });
        }
        hist[s.hamming(t)?] += 1;
    }
    Ok(hist)
}
