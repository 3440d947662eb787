//! Contrastive energy losses on a predicted QUBO.
//!
//! All `dL/dA` matrices treat every entry `A_ij` as an independent variable
//! and are zero outside the mask. [`free_gradient`] folds them onto the
//! symmetric free parameters the network emits.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::nn::ForwardTrace;
use crate::qubo::{QuboMatrix, SquareMatrix};
use crate::scalar::Scalar;

pub const DEFAULT_LAMBDA_UNIQUE: f64 = 1e-3;
pub const DEFAULT_LAMBDA_MLP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub unique: f64,
    pub mlp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            unique: DEFAULT_LAMBDA_UNIQUE,
            mlp: DEFAULT_LAMBDA_MLP,
        }
    }
}

/// `dA[i][j] += scale · (aᵢaⱼ − bᵢbⱼ)` over masked-in entries.
fn outer_difference<T: Scalar>(
    a: &QuboMatrix<T>,
    plus: &BitString,
    minus: &BitString,
    scale: T,
) -> SquareMatrix<T> {
    let n = a.n();
    let mut g = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if !a.allowed(i, j) {
                continue;
            }
            let p = (plus.get(i) && plus.get(j)) as u8 as f64;
            let m = (minus.get(i) && minus.get(j)) as u8 as f64;
            if p != m {
                g[(i, j)] = scale * T::from_f64_lossy(p - m);
            }
        }
    }
    g
}

fn check_len<T: Scalar>(a: &QuboMatrix<T>, x: &BitString) -> Result<()> {
    if x.len() != a.n() {
        return Err(Error::Dimension {
            what: "bitstring length",
            expected: a.n(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `x̂ᵀAx̂ − x*ᵀAx*` with the solver held fixed (its dependence on `A` has zero
/// derivative almost everywhere and is dropped).
pub fn loss_gap<T: Scalar>(
    a: &QuboMatrix<T>,
    truth: &BitString,
    x_star: Option<&BitString>,
) -> Result<(T, SquareMatrix<T>)> {
    let x_star = x_star.ok_or_else(|| Error::InvalidParam("solver returned no minimizer".into()))?;
    check_len(a, truth)?;
    check_len(a, x_star)?;
    let value = a.energy_unchecked(truth) - a.energy_unchecked(x_star);
    Ok((value, outer_difference(a, truth, x_star, T::one())))
}

#[derive(Clone, Debug)]
pub struct UniqueLoss<T> {
    pub value: T,
    pub grad: SquareMatrix<T>,
    /// No second-best state was available; value and gradient are zero.
    pub absent: bool,
    /// The divergence guard replaced the value and zeroed the gradient.
    pub clamped: bool,
}

/// `−|x̂ᵀAx̂ − x⁺ᵀAx⁺|`. The subgradient at zero uses sign `+1`.
///
/// When `clamp_at` is given and `|value|` exceeds it, the value is pinned to
/// `−clamp_at` and the gradient is zero.
pub fn loss_unique<T: Scalar>(
    a: &QuboMatrix<T>,
    truth: &BitString,
    x_plus: Option<&BitString>,
    clamp_at: Option<T>,
) -> Result<UniqueLoss<T>> {
    check_len(a, truth)?;
    let Some(x_plus) = x_plus else {
        return Ok(UniqueLoss {
            value: T::zero(),
            grad: SquareMatrix::zeros(a.n()),
            absent: true,
            clamped: false,
        });
    };
    check_len(a, x_plus)?;
    let diff = a.energy_unchecked(truth) - a.energy_unchecked(x_plus);
    let value = -diff.abs();
    if let Some(limit) = clamp_at {
        if diff.abs() > limit {
            return Ok(UniqueLoss {
                value: -limit,
                grad: SquareMatrix::zeros(a.n()),
                absent: false,
                clamped: true,
            });
        }
    }
    let sign = if diff >= T::zero() { T::one() } else { -T::one() };
    Ok(UniqueLoss {
        value,
        grad: outer_difference(a, truth, x_plus, -sign),
        absent: false,
        clamped: false,
    })
}

/// `Σ_f ‖f‖₁ / |f|` over hidden-layer outputs, with `sign(0) = 0`.
pub fn loss_mlp<T: Scalar>(trace: &ForwardTrace<T>) -> (T, Vec<Vec<T>>) {
    let mut value = T::zero();
    let grads = trace
        .features()
        .iter()
        .map(|f| {
            let w = T::one() / T::of_usize(f.len().max(1));
            value += w * f.iter().map(|v| v.abs()).sum::<T>();
            f.iter()
                .map(|&v| {
                    if v > T::zero() {
                        w
                    } else if v < T::zero() {
                        -w
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();
    (value, grads)
}

/// Gradient with respect to the symmetric free parameters at `index`: a free
/// off-diagonal value feeds both `A_ij` and `A_ji`.
pub fn free_gradient<T: Scalar>(d_a: &SquareMatrix<T>, index: &[(usize, usize)]) -> Vec<T> {
    index
        .iter()
        .map(|&(i, j)| {
            if i == j {
                d_a[(i, i)]
            } else {
                d_a[(i, j)] + d_a[(j, i)]
            }
        })
        .collect()
}

/// Divergence guard for the unbounded uniqueness term: `10·|E(x*)| + 1`.
pub fn unique_clamp<T: Scalar>(best_energy: T) -> T {
    T::from_f64_lossy(10.0) * best_energy.abs() + T::one()
}

#[derive(Clone, Debug)]
pub struct TotalLoss<T> {
    pub value: T,
    pub gap: T,
    pub unique: T,
    pub mlp: T,
    /// Gradient with respect to the network output (free parameters of `A`).
    pub d_out: Vec<T>,
    /// Gradient with respect to each hidden feature.
    pub d_features: Vec<Vec<T>>,
    pub unique_absent: bool,
    pub unique_clamped: bool,
}

/// `L_gap + λ_unique·L_unique + λ_mlp·L_mlp` for one instance whose QUBO `a`
/// was assembled from `trace.output()` laid out by `index`.
pub fn total_loss<T: Scalar>(
    a: &QuboMatrix<T>,
    index: &[(usize, usize)],
    trace: &ForwardTrace<T>,
    truth: &BitString,
    x_star: Option<&BitString>,
    x_plus: Option<&BitString>,
    weights: LossWeights,
) -> Result<TotalLoss<T>> {
    if trace.output().len() != index.len() {
        return Err(Error::Dimension {
            what: "network output width",
            expected: index.len(),
            got: trace.output().len(),
        });
    }
    let (gap, d_gap) = loss_gap(a, truth, x_star)?;
    let clamp = x_star.map(|x| unique_clamp(a.energy_unchecked(x)));
    let uniq = loss_unique(a, truth, x_plus, clamp)?;
    let (mlp, d_feat) = loss_mlp(trace);

    let lu = T::from_f64_lossy(weights.unique);
    let lm = T::from_f64_lossy(weights.mlp);
    let g_gap = free_gradient(&d_gap, index);
    let g_uniq = free_gradient(&uniq.grad, index);
    let d_out = g_gap
        .iter()
        .zip(&g_uniq)
        .map(|(&g, &u)| g + lu * u)
        .collect();
    let d_features = d_feat
        .into_iter()
        .map(|f| f.into_iter().map(|v| lm * v).collect())
        .collect();
    Ok(TotalLoss {
        value: gap + lu * uniq.value + lm * mlp,
        gap,
        unique: uniq.value,
        mlp,
        d_out,
        d_features,
        unique_absent: uniq.absent,
        unique_clamped: uniq.clamped,
    })
}
