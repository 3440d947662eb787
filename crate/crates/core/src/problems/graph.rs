//! Graph matching as a quadratic assignment problem.
//!
//! An assignment `i → a` is the binary variable `k·i + a`; a permutation `P`
//! sets `x[k·i + P(i)] = 1` and its QAP cost is `xᵀWx`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::dataset::ProblemInstance;
use super::geometry::Vec2;
use super::permutation::{encode_permutation, next_permutation};
use crate::error::{Error, Result};
use crate::qubo::SquareMatrix;
use crate::rng;

pub const RANDGRAPH: &str = "randgraph";
pub const WILLOW: &str = "willow";

/// Weight of assignment pairs no permutation can select (`i = j` xor `a = b`).
pub const RANDGRAPH_PENALTY: f64 = 1.0;

/// QAP weights from source and target distance matrices:
/// `W[k·i+a][k·j+b] = |Ds[i][j] − Dt[a][b]|` for consistent pairs, the
/// penalty otherwise.
pub fn randgraph_w(d_src: &SquareMatrix<f64>, d_tgt: &SquareMatrix<f64>, penalty: f64) -> Result<SquareMatrix<f64>> {
    let k = d_src.n();
    if d_tgt.n() != k {
        return Err(Error::Dimension {
            what: "target distance matrix",
            expected: k,
            got: d_tgt.n(),
        });
    }
    let mut w = SquareMatrix::zeros(k * k);
    for i in 0..k {
        for a in 0..k {
            for j in 0..k {
                for b in 0..k {
                    w[(k * i + a, k * j + b)] = if (i == j) != (a == b) {
                        penalty
                    } else {
                        (d_src[(i, j)] - d_tgt[(a, b)]).abs()
                    };
                }
            }
        }
    }
    Ok(w)
}

/// A RandGraph instance: `D ~ U(0,1)^{k×k}`, a uniform permutation `P`, and
/// the target graph `D'[P(i)][P(j)] = D[i][j]`, so `P` has objective zero.
pub fn gen_randgraph(k: usize, seed: u64) -> Result<ProblemInstance> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("randgraph needs k >= 2, got {k}")));
    }
    let mut r = rng::from_seed(seed);
    let d: Vec<f64> = (0..k * k).map(|_| r.gen::<f64>()).collect();
    let d_src = SquareMatrix::from_row_major(k, d)?;
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut r);
    let mut d_tgt = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            d_tgt[(perm[i], perm[j])] = d_src[(i, j)];
        }
    }
    let w = randgraph_w(&d_src, &d_tgt, RANDGRAPH_PENALTY)?;
    Ok(ProblemInstance::new(
        RANDGRAPH,
        w.as_slice().to_vec(),
        encode_permutation(&perm)?.into_bits(),
        json!({ "k": k, "permutation": perm }),
    ))
}

/// Seeded batch of RandGraph instances; instance `i` uses child seed `i`.
pub fn gen_randgraph_set(k: usize, count: usize, seed: u64) -> Result<Vec<ProblemInstance>> {
    (0..count as u64)
        .map(|i| gen_randgraph(k, rng::child_seed(seed, i)))
        .collect()
}

/// `vec(X)ᵀ W vec(X)` for the permutation matrix of `p`.
pub fn qap_objective(w: &SquareMatrix<f64>, p: &[usize]) -> Result<f64> {
    let k = p.len();
    if w.n() != k * k {
        return Err(Error::Dimension {
            what: "QAP weight matrix",
            expected: k * k,
            got: w.n(),
        });
    }
    if p.iter().any(|&v| v >= k) {
        return Err(Error::InvalidParam(format!("{p:?} maps outside 0..{k}")));
    }
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            s += w[(k * i + p[i], k * j + p[j])];
        }
    }
    Ok(s)
}

pub const MAX_DIRECT_K: usize = 8;

/// Exhaustive QAP minimizer; ties go to the lexicographically smallest
/// permutation.
pub fn direct_solve(w: &SquareMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    if k > MAX_DIRECT_K {
        return Err(Error::Budget {
            solver: "direct_solve",
            size: k,
            limit: MAX_DIRECT_K,
        });
    }
    let mut p: Vec<usize> = (0..k).collect();
    let mut best = (qap_objective(w, &p)?, p.clone());
    while next_permutation(&mut p) {
        let v = qap_objective(w, &p)?;
        if v < best.0 {
            best = (v, p.clone());
        }
    }
    Ok(best.1)
}

/// Keypoints of one image with their appearance descriptors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointSet {
    pub coords: Vec<Vec2>,
    pub features: Vec<Vec<f64>>,
}

/// Two keypoint sets and, optionally, the true assignment (identity when
/// absent, as annotated datasets list keypoints in corresponding order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeypointPair {
    pub source: KeypointSet,
    pub target: KeypointSet,
    #[serde(default)]
    pub truth: Option<Vec<usize>>,
}

pub fn load_keypoint_pairs(path: &Path) -> Result<Vec<KeypointPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    if v.is_array() {
        Ok(serde_json::from_value(v)?)
    } else {
        Ok(vec![serde_json::from_value(v)?])
    }
}

/// Pairwise geometric consistency between the source edge `(i, j)` and the
/// target edge `(a, b)`.
pub trait GeometricKernel: Sync {
    fn weight(&self, src: (Vec2, Vec2), tgt: (Vec2, Vec2), sigma: f64) -> f64;
}

/// `−[η·exp(−Δd²/σ²) + (1−η)·exp(−Δφ²/σ_φ²)]` with `Δd` the change in edge
/// length and `Δφ` the wrapped change in edge direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpKernel {
    pub eta: f64,
    pub sigma_angle: f64,
}

impl Default for ExpKernel {
    fn default() -> Self {
        ExpKernel {
            eta: 0.98,
            sigma_angle: std::f64::consts::FRAC_PI_4,
        }
    }
}

fn edge(p: Vec2, q: Vec2) -> (f64, f64) {
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    (dx.hypot(dy), dy.atan2(dx))
}

impl GeometricKernel for ExpKernel {
    fn weight(&self, src: (Vec2, Vec2), tgt: (Vec2, Vec2), sigma: f64) -> f64 {
        let (ls, as_) = edge(src.0, src.1);
        let (lt, at) = edge(tgt.0, tgt.1);
        let dd = (ls - lt) / sigma;
        let mut dphi = (as_ - at).rem_euclid(std::f64::consts::TAU);
        if dphi > std::f64::consts::PI {
            dphi = std::f64::consts::TAU - dphi;
        }
        let dphi = dphi / self.sigma_angle;
        -(self.eta * (-dd * dd).exp() + (1.0 - self.eta) * (-dphi * dphi).exp())
    }
}

pub const DEFAULT_TAU: f64 = 0.81;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn mean_pairwise_distance(pts: &[Vec2]) -> f64 {
    let mut s = 0.0;
    let mut c = 0usize;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            s += edge(pts[i], pts[j]).0;
            c += 1;
        }
    }
    if c == 0 || s == 0.0 {
        1.0
    } else {
        s / c as f64
    }
}

/// `τ·W_app + (1−τ)·W_geom`. `W_app` is diagonal with the cosine similarity
/// of each assignment's descriptors; `W_geom` holds the kernel on consistent
/// assignment pairs (`i ≠ j`, `a ≠ b`) and is zero elsewhere. `σ` is the mean
/// pairwise source distance.
pub fn willow_w(pair: &KeypointPair, tau: f64, kernel: &dyn GeometricKernel) -> Result<SquareMatrix<f64>> {
    let (s, t) = (&pair.source, &pair.target);
    let k = s.coords.len();
    for set in [s, t] {
        if set.coords.len() != k || set.features.len() != k {
            return Err(Error::Dimension {
                what: "keypoint count",
                expected: k,
                got: set.coords.len().min(set.features.len()),
            });
        }
    }
    let dim = s.features.first().map_or(0, Vec::len);
    if let Some(bad) = s.features.iter().chain(&t.features).find(|f| f.len() != dim) {
        return Err(Error::Dimension {
            what: "feature dimension",
            expected: dim,
            got: bad.len(),
        });
    }
    let sigma = mean_pairwise_distance(&s.coords);
    let mut w = SquareMatrix::zeros(k * k);
    for i in 0..k {
        for a in 0..k {
            let u = k * i + a;
            w[(u, u)] = tau * cosine(&s.features[i], &t.features[a]);
            for j in 0..k {
                for b in 0..k {
                    if i == j || a == b {
                        continue;
                    }
                    let g = kernel.weight((s.coords[i], s.coords[j]), (t.coords[a], t.coords[b]), sigma);
                    w[(u, k * j + b)] = (1.0 - tau) * g;
                }
            }
        }
    }
    Ok(w)
}

pub fn willow_instance(pair: &KeypointPair, tau: f64, kernel: &dyn GeometricKernel) -> Result<ProblemInstance> {
    let k = pair.source.coords.len();
    let truth = pair.truth.clone().unwrap_or_else(|| (0..k).collect());
    let w = willow_w(pair, tau, kernel)?;
    Ok(ProblemInstance::new(
        WILLOW,
        w.as_slice().to_vec(),
        encode_permutation(&truth)?.into_bits(),
        json!({ "k": k, "permutation": truth }),
    ))
}

/// The permutation a graph-matching instance was generated from.
pub fn instance_permutation(inst: &ProblemInstance) -> Result<Vec<usize>> {
    inst.meta_field("permutation")
}

pub fn instance_w(inst: &ProblemInstance) -> Result<SquareMatrix<f64>> {
    let n = (inst.p.len() as f64).sqrt().round() as usize;
    SquareMatrix::from_row_major(n, inst.p.clone())
}
