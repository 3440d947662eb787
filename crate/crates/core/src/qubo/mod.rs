//! QUBO and Ising representations, energy evaluation and hardware masks.
//!
//! A [`QuboMatrix`] is stored dense and symmetric together with a boolean
//! mask of allowed couplings. Entries outside the mask are always zero.

mod format;
mod topology;

use std::ops::Range;

pub use format::{parse_qubo, write_qubo};
pub use topology::{
    chimera_cell, pegasus_tile, pegasus_tile_default, Topology, TopologyKind,
    DEFAULT_PEGASUS_INTERCELL,
};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension {
                what: "square matrix entries",
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Dimension {
                    what: "matrix row length",
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `½(M + Mᵀ)`.
    pub fn symmetrized(&self) -> Self {
        let half = T::from_f64_lossy(0.5);
        let mut s = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                s[(i, j)] = half * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }

    /// `xᵀMx` by the plain double loop over set bits.
    pub fn quadratic_form(&self, x: &BitString) -> T {
        let ones: Vec<usize> = x.ones_positions().collect();
        let mut acc = T::zero();
        for &i in &ones {
            let row = self.row(i);
            for &j in &ones {
                acc += row[j];
            }
        }
        acc
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Symmetric coupling matrix `A` of the objective `xᵀAx` with its sparsity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboMatrix<T> {
    values: SquareMatrix<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> QuboMatrix<T> {
    /// Dense (fully connected) QUBO; the input is symmetrized.
    pub fn dense(values: SquareMatrix<T>) -> Result<Self> {
        let n = values.n();
        apply_mask(&values, &Topology::dense(n))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::dense(SquareMatrix::from_rows(rows)?)
    }

    pub fn zeros(topology: &Topology) -> Self {
        let n = topology.n();
        QuboMatrix {
            values: SquareMatrix::zeros(n),
            mask: topology.adjacency().to_vec(),
        }
    }

    /// Builds `A` from one value per allowed upper-triangular position, in the
    /// order of [`Topology::free_parameter_index`].
    pub fn from_free_parameters(
        topology: &Topology,
        index: &[(usize, usize)],
        params: &[T],
    ) -> Result<Self> {
        if index.len() != params.len() {
            return Err(Error::Dimension {
                what: "free parameter count",
                expected: index.len(),
                got: params.len(),
            });
        }
        let mut q = Self::zeros(topology);
        for (&(i, j), &v) in index.iter().zip(params) {
            q.values[(i, j)] = v;
            q.values[(j, i)] = v;
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.values.n()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[(i, j)]
    }

    #[inline]
    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n() + j]
    }

    pub fn values(&self) -> &SquareMatrix<T> {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_diagonal_only(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || !self.allowed(i, j)))
    }

    /// Values at the given upper-triangular positions.
    pub fn free_parameters(&self, index: &[(usize, usize)]) -> Vec<T> {
        index.iter().map(|&(i, j)| self.values[(i, j)]).collect()
    }

    /// `xᵀAx` summed over masked-in entries.
    pub fn energy(&self, x: &BitString) -> Result<T> {
        if x.len() != self.n() {
            return Err(Error::Dimension {
                what: "bitstring length",
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &BitString) -> T {
        let n = self.n();
        let ones: Vec<usize> = x.ones_positions().collect();
        let mut acc = T::zero();
        for &i in &ones {
            let row = self.values.row(i);
            let mask = &self.mask[i * n..(i + 1) * n];
            for &j in &ones {
                if mask[j] {
                    acc += row[j];
                }
            }
        }
        acc
    }

    /// Energy of the state encoded by the low `n` bits of `index` (bit 0 of
    /// the solution is the most significant bit of `index`).
    pub(crate) fn energy_of_index(&self, index: u64) -> T {
        let n = self.n();
        let mut acc = T::zero();
        for i in 0..n {
            if (index >> (n - 1 - i)) & 1 == 0 {
                continue;
            }
            let row = self.values.row(i);
            for (j, &v) in row.iter().enumerate() {
                if (index >> (n - 1 - j)) & 1 == 1 {
                    acc += v;
                }
            }
        }
        acc
    }
}

/// Ising problem `sᵀJs + bᵀs` over spins `s ∈ {−1,1}ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingProblem<T> {
    pub couplings: SquareMatrix<T>,
    pub biases: Vec<T>,
}

impl<T: Scalar> IsingProblem<T> {
    pub fn new(couplings: SquareMatrix<T>, biases: Vec<T>) -> Result<Self> {
        if biases.len() != couplings.n() {
            return Err(Error::Dimension {
                what: "bias vector length",
                expected: couplings.n(),
                got: biases.len(),
            });
        }
        Ok(IsingProblem { couplings, biases })
    }

    pub fn n(&self) -> usize {
        self.biases.len()
    }

    /// Energy of the spin state `s = 2x − 1`.
    pub fn energy_of_bits(&self, x: &BitString) -> Result<T> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::Dimension {
                what: "bitstring length",
                expected: n,
                got: x.len(),
            });
        }
        let spin = |i: usize| if x.get(i) { T::one() } else { -T::one() };
        let mut acc = T::zero();
        for i in 0..n {
            let si = spin(i);
            for j in 0..n {
                acc += self.couplings[(i, j)] * si * spin(j);
            }
            acc += self.biases[i] * si;
        }
        Ok(acc)
    }
}

/// Converts an Ising problem to an energy-equivalent QUBO.
///
/// Expanding `sᵀJs + bᵀs` under `s = 2x − 1` gives
/// `xᵀ(4J)x − 2Σᵢ xᵢ(rᵢ + cᵢ) + 2bᵀx + ΣJ − Σb` with `rᵢ`, `cᵢ` the row and
/// column sums of `J`. Linear terms move onto the diagonal (`xᵢ² = xᵢ`) and
/// the constant is returned as the offset, so that
/// `energy(A, x) + offset == sᵀJs + bᵀs`.
pub fn ising_to_qubo<T: Scalar>(problem: &IsingProblem<T>) -> Result<(QuboMatrix<T>, T)> {
    let j = &problem.couplings;
    let n = j.n();
    if problem.biases.len() != n {
        return Err(Error::Dimension {
            what: "bias vector length",
            expected: n,
            got: problem.biases.len(),
        });
    }
    let two = T::from_f64_lossy(2.0);
    let four = T::from_f64_lossy(4.0);

    let mut a = SquareMatrix::zeros(n);
    let mut offset = T::zero();
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] = four * j[(r, c)];
            offset += j[(r, c)];
        }
    }
    for i in 0..n {
        let row_sum: T = j.row(i).iter().copied().sum();
        let col_sum: T = (0..n).map(|r| j[(r, i)]).sum();
        a[(i, i)] += two * problem.biases[i] - two * (row_sum + col_sum);
        offset -= problem.biases[i];
    }
    Ok((QuboMatrix::dense(a)?, offset))
}

/// Restricts a dense matrix to a topology: symmetrizes by averaging and zeroes
/// every disallowed entry.
pub fn apply_mask<T: Scalar>(dense: &SquareMatrix<T>, topology: &Topology) -> Result<QuboMatrix<T>> {
    let n = dense.n();
    if topology.n() != n {
        return Err(Error::Dimension {
            what: "topology size",
            expected: n,
            got: topology.n(),
        });
    }
    let half = T::from_f64_lossy(0.5);
    let mut values = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if topology.allows(i, j) {
                values[(i, j)] = half * (dense[(i, j)] + dense[(j, i)]);
            }
        }
    }
    Ok(QuboMatrix {
        values,
        mask: topology.adjacency().to_vec(),
    })
}

/// Places instances sharing one topology on the diagonal of a single larger
/// QUBO, as when several problems are annealed side by side on one chip.
///
/// Returns the block-diagonal matrix and the variable range of each block.
pub fn parallel_tile<T: Scalar>(
    instances: &[QuboMatrix<T>],
) -> Result<(QuboMatrix<T>, Vec<Range<usize>>)> {
    let first = instances
        .first()
        .ok_or_else(|| Error::InvalidParam("parallel_tile needs at least one instance".into()))?;
    let n = first.n();
    for q in instances {
        if q.n() != n {
            return Err(Error::Dimension {
                what: "tiled instance size",
                expected: n,
                got: q.n(),
            });
        }
        if q.mask != first.mask {
            return Err(Error::Shape("tiled instances have different topologies".into()));
        }
    }
    let total = n * instances.len();
    let mut values = SquareMatrix::zeros(total);
    let mut mask = vec![false; total * total];
    let mut ranges = Vec::with_capacity(instances.len());
    for (b, q) in instances.iter().enumerate() {
        let base = b * n;
        for i in 0..n {
            for j in 0..n {
                values[(base + i, base + j)] = q.get(i, j);
                mask[(base + i) * total + base + j] = q.allowed(i, j);
            }
        }
        ranges.push(base..base + n);
    }
    Ok((QuboMatrix { values, mask }, ranges))
}
