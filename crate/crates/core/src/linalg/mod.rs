//! Dense linear algebra for few-qubit operators and states.
//!
//! Qubit 0 is the least-significant bit of every basis index.

pub mod density;
pub mod eigen;
pub mod matrix;
pub mod pauli;

pub use density::{apply_unitary, expectation, partial_trace, DensityMatrix};
pub use eigen::{hermitian_eigen, hermitian_evolve};
pub use matrix::{embed, kron, ComplexMatrix, C64};
pub use pauli::{pauli_to_matrix, Pauli, PauliString, Phase};
