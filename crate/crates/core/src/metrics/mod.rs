//! Evaluation metrics and the baselines they are compared against.

mod baselines;

use std::io::Write;

pub use baselines::{diag_solve, jacobi_eigen, procrustes3d, pure_infer, JACOBI_TOL};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::problems::geometry::{mat_mul, orthogonality_defect, transpose, Mat3};
use crate::problems::permutation::project_to_permutation;

/// Wrapped absolute angle difference in degrees, in `[0, 180]`.
pub fn geodesic_so2(a: f64, b: f64) -> f64 {
    let d = (a - b).to_degrees().rem_euclid(360.0);
    d.min(360.0 - d)
}

pub const ROTATION_TOL: f64 = 1e-6;

/// Rotation angle of `R₁ᵀR₂` in degrees.
///
/// Evaluated as `atan2(sin θ, cos θ)` with `cos θ = (tr − 1)/2` clamped to
/// `[−1, 1]` and `sin θ` from the skew part, which equals the arccos form on
/// rotations but keeps full precision near zero.
pub fn geodesic_so3(r1: &Mat3, r2: &Mat3) -> Result<f64> {
    for r in [r1, r2] {
        let defect = orthogonality_defect(r);
        if defect > ROTATION_TOL || !defect.is_finite() {
            return Err(Error::NotRotation(defect));
        }
    }
    let m = mat_mul(&transpose(r1), r2);
    let c = ((m[0][0] + m[1][1] + m[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0);
    let axis = [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]];
    let s = 0.5 * (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    Ok(s.atan2(c).to_degrees())
}

/// Percentage of exact matches, optionally after projecting each prediction
/// onto the nearest permutation.
pub fn matching_accuracy(predictions: &[BitString], truths: &[BitString], k: usize, project: bool) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            what: "prediction count",
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (p, t) in predictions.iter().zip(truths) {
        let hit = if project {
            project_to_permutation(p, k)?.bits() == t
        } else {
            p == t
        };
        correct += hit as usize;
    }
    Ok(100.0 * correct as f64 / truths.len() as f64)
}

/// Mean, median and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

/// `None` for an empty list. Even counts take the mean of the middle pair.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    Some(Summary {
        count: values.len(),
        mean,
        median,
        std: var.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntervalStats {
    pub lo: f64,
    pub hi: f64,
    /// `None` when no instance fell into the interval.
    pub summary: Option<Summary>,
}

/// Buckets `errors` by `true_angles` into `[edges[i], edges[i+1])`, the last
/// interval closed on the right.
pub fn interval_report(errors: &[f64], true_angles: &[f64], edges: &[f64]) -> Result<Vec<IntervalStats>> {
    if errors.len() != true_angles.len() {
        return Err(Error::Dimension {
            what: "angle count",
            expected: errors.len(),
            got: true_angles.len(),
        });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam("interval edges must be increasing, at least two".into()));
    }
    let last = edges.len() - 2;
    Ok(edges
        .windows(2)
        .enumerate()
        .map(|(b, w)| {
            let inside: Vec<f64> = errors
                .iter()
                .zip(true_angles)
                .filter(|(_, &a)| a >= w[0] && (a < w[1] || (b == last && a == w[1])))
                .map(|(&e, _)| e)
                .collect();
            IntervalStats {
                lo: w[0],
                hi: w[1],
                summary: summarize(&inside),
            }
        })
        .collect())
}

/// Per-instance metric values in instance order.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub metric: String,
    pub values: Vec<f64>,
}

impl EvalReport {
    pub fn new(method: &str, metric: &str, values: Vec<f64>) -> Self {
        EvalReport {
            method: method.to_string(),
            metric: metric.to_string(),
            values,
        }
    }

    pub fn summary(&self) -> Option<Summary> {
        summarize(&self.values)
    }

    /// `index,<metric>` rows.
    pub fn write_instances_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,{}", self.metric)?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }

    pub const SUMMARY_HEADER: &'static str = "method,metric,count,mean,median,std";

    pub fn summary_row(&self) -> String {
        match self.summary() {
            Some(s) => format!("{},{},{},{},{},{}", self.method, self.metric, s.count, s.mean, s.median, s.std),
            None => format!("{},{},0,,,", self.method, self.metric),
        }
    }
}
