//! Learning QUBO couplings from data.
//!
//! A small perceptron maps a problem instance `p` to the couplings of a QUBO
//! `min xᵀAx`; any QUBO solver then returns the solution bits. Training pushes
//! the energy of the ground-truth bits below that of the solver's minimizer,
//! so no gradient ever has to pass through the solver itself.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`, the precision used by every file format.

pub mod bits;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod problems;
pub mod qubo;
pub mod rng;
pub mod scalar;
pub mod solvers;
pub mod training;

pub use bits::BitString;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Qubo = qubo::QuboMatrix<f64>;
pub type Ising = qubo::IsingProblem<f64>;
pub type Matrix = qubo::SquareMatrix<f64>;
pub type Solution = solvers::SolverResult<f64>;
pub type Mlp = nn::MlpParams<f64>;
