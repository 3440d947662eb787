//! Closed-form and classical baselines.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::problems::geometry::{cross, dot, mat_vec, norm, transpose, Mat3, Vec3};
use crate::problems::pointcloud::Pair3;
use crate::problems::rot3d::cross_covariance;
use crate::qubo::QuboMatrix;
use crate::scalar::Scalar;

/// Minimizer of a diagonal QUBO: `xᵢ = 1` iff `Aᵢᵢ < 0`.
pub fn diag_solve<T: Scalar>(a: &QuboMatrix<T>) -> Result<BitString> {
    if !a.is_diagonal_only() {
        return Err(Error::NotDiagonal);
    }
    Ok(BitString::from_bools((0..a.n()).map(|i| a.get(i, i) < T::zero()).collect()))
}

/// Direct regression baseline: bit `i` is set iff output `i` is strictly positive.
pub fn pure_infer<T: Scalar>(params: &MlpParams<T>, p: &[T]) -> Result<BitString> {
    let trace = params.forward(p)?;
    Ok(BitString::from_bools(trace.output().iter().map(|&v| v > T::zero()).collect()))
}

pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the eigenvectors as columns.
pub fn jacobi_eigen(m: &Mat3) -> (Vec3, Mat3) {
    let mut a = *m;
    let mut v = crate::problems::geometry::IDENTITY3;
    let scale = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = (a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2)).sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|i| a[i][i]);
    let mut vecs = [[0.0; 3]; 3];
    for (col, &i) in order.iter().enumerate() {
        for r in 0..3 {
            vecs[r][col] = v[r][i];
        }
    }
    (values, vecs)
}

fn column(m: &Mat3, c: usize) -> Vec3 {
    [m[0][c], m[1][c], m[2][c]]
}

fn scaled(v: &Vec3, s: f64) -> Vec3 {
    v.map(|x| x * s)
}

/// Proper rotation `R` minimizing `Σ‖R·s − t‖²` over the matched points.
///
/// With `M = Σ t sᵀ = U·S·Vᵀ`, the right singular vectors come from the
/// eigenvectors of `MᵀM`; the third left vector is the cross product of the
/// first two, which also applies the `det = +1` correction.
pub fn procrustes3d(pair: &Pair3) -> Result<Mat3> {
    let m = transpose(&cross_covariance(pair)?);
    let mtm = crate::problems::geometry::mat_mul(&transpose(&m), &m);
    let (vals, v) = jacobi_eigen(&mtm);
    let s1 = vals[0].max(0.0).sqrt();
    let s2 = vals[1].max(0.0).sqrt();
    if s1 == 0.0 || s2 <= 1e-9 * s1 {
        return Err(Error::Degenerate("matched points are collinear or coincident".into()));
    }
    let v1 = column(&v, 0);
    let v2 = column(&v, 1);
    let v3 = cross(&v1, &v2);
    let u1 = scaled(&mat_vec(&m, &v1), 1.0 / s1);
    let mut u2 = scaled(&mat_vec(&m, &v2), 1.0 / s2);
    // Re-orthogonalize against rounding before completing the frame.
    let d = dot(&u1, &u2);
    u2 = [0, 1, 2].map(|k| u2[k] - d * u1[k]);
    u2 = scaled(&u2, 1.0 / norm(&u2));
    let u1 = scaled(&u1, 1.0 / norm(&u1));
    let u3 = cross(&u1, &u2);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = u1[i] * v1[j] + u2[i] * v2[j] + u3[i] * v3[j];
        }
    }
    Ok(r)
}
