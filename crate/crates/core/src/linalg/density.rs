use super::eigen::min_eigenvalue;
use super::matrix::{check_qubits, ComplexMatrix, LocalIndex, C64, ZERO};
use super::pauli::PauliString;
use crate::error::{Error, Result};

pub const STRUCTURE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
/// Imaginary parts of Pauli expectations beyond this mean the state is broken.
pub const IMAG_TOL: f64 = 1e-8;

/// Mixed state on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Result<Self> {
        let dim = matrix.rows();
        if !matrix.is_square() || !dim.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "density matrix must be 2^n x 2^n, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    /// Computational basis state `|index⟩⟨index|`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let dim = 1 << n_qubits;
        assert!(index < dim, "basis index out of range");
        let mut matrix = ComplexMatrix::zeros(dim, dim);
        matrix[(index, index)] = C64::new(1.0, 0.0);
        Self { n_qubits, matrix }
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        Self::basis_state(n_qubits, 0)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self {
            n_qubits,
            matrix: ComplexMatrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0)),
        }
    }

    /// `|ψ⟩⟨ψ|` for a (renormalized) state vector.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !psi.len().is_power_of_two() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState(
                "state vector must be non-zero with power-of-two length".into(),
            ));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        let dim = v.len();
        let matrix = ComplexMatrix::from_fn(dim, dim, |r, c| v[r] * v[c].conj());
        Self::from_matrix_unchecked(matrix)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Raw access for channel kernels that may leave the state set transiently.
    pub(crate) fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.matrix.hermiticity_error();
        if herm > STRUCTURE_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = min_eigenvalue(&self.matrix)?;
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `U ρ U†` with `u` acting on `qubits` (`qubits[j]` is local bit `j`).
    pub fn apply_unitary(&self, u: &ComplexMatrix, qubits: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.apply_unitary_mut(u, qubits)?;
        Ok(out)
    }

    pub fn apply_unitary_mut(&mut self, u: &ComplexMatrix, qubits: &[usize]) -> Result<()> {
        self.check_local(u, qubits)?;
        self.matrix.conjugate_local(u, qubits);
        Ok(())
    }

    /// `Σ_k K_k ρ K_k†` with every operator acting on `qubits`.
    pub fn apply_kraus_mut(&mut self, ops: &[ComplexMatrix], qubits: &[usize]) -> Result<()> {
        for k in ops {
            self.check_local(k, qubits)?;
        }
        let mut acc = ComplexMatrix::zeros(self.dim(), self.dim());
        for k in ops {
            let mut term = self.matrix.clone();
            term.conjugate_local(k, qubits);
            acc = &acc + &term;
        }
        self.matrix = acc;
        Ok(())
    }

    /// `ρ ← (1 − λ)ρ + λ (I_S/d_S ⊗ Tr_S ρ)` for the subset `S = qubits`.
    pub fn depolarize_mut(&mut self, qubits: &[usize], lambda: f64) -> Result<()> {
        check_qubits(qubits, self.n_qubits)?;
        if lambda == 0.0 || qubits.is_empty() {
            return Ok(());
        }
        let dim = self.dim();
        let local = LocalIndex::new(dim, qubits);
        let d_s = local.offsets.len() as f64;
        let mut reduced = ComplexMatrix::zeros(dim, dim);
        for a in local.bases() {
            for b in local.bases() {
                let sum: C64 = local
                    .offsets
                    .iter()
                    .map(|off| self.matrix[(a | off, b | off)])
                    .sum();
                let v = sum / d_s;
                for off in &local.offsets {
                    reduced[(a | off, b | off)] = v;
                }
            }
        }
        let keep = C64::new(1.0 - lambda, 0.0);
        let mix = C64::new(lambda, 0.0);
        for (x, y) in self.matrix.data_mut().iter_mut().zip(reduced.data()) {
            *x = *x * keep + *y * mix;
        }
        Ok(())
    }

    /// Reduced state on `keep`; qubit `j` of the result is `keep[j]`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::QubitIndex("partial trace must keep at least one qubit".into()));
        }
        check_qubits(keep, self.n_qubits)?;
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !keep.contains(q)).collect();
        let kept = LocalIndex::new(self.dim(), keep);
        let gone = LocalIndex::new(self.dim(), &traced);
        let k = kept.offsets.len();
        let mut out = ComplexMatrix::zeros(k, k);
        for (r, ro) in kept.offsets.iter().enumerate() {
            for (c, co) in kept.offsets.iter().enumerate() {
                out[(r, c)] = gone
                    .offsets
                    .iter()
                    .map(|g| self.matrix[(ro | g, co | g)])
                    .sum();
            }
        }
        Self::from_matrix_unchecked(out)
    }

    /// `Tr(ρ P)`; errors if the imaginary part exceeds [`IMAG_TOL`] for a Hermitian `P`.
    pub fn expectation(&self, obs: &PauliString) -> Result<f64> {
        let z = self.expectation_complex(obs)?;
        if obs.is_hermitian() && z.im.abs() > IMAG_TOL {
            return Err(Error::ComplexExpectation(z.im));
        }
        Ok(z.re)
    }

    pub fn expectation_complex(&self, obs: &PauliString) -> Result<C64> {
        if obs.n_qubits() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "{}-qubit observable on {}-qubit state",
                obs.n_qubits(),
                self.n_qubits
            )));
        }
        let mask = obs.flip_mask();
        // P|c⟩ = ph(c)|c ⊕ mask⟩, so Tr(ρP) = Σ_c ph(c) ρ[c, c ⊕ mask].
        Ok((0..self.dim())
            .map(|c| obs.basis_phase(c) * self.matrix[(c, c ^ mask)])
            .fold(ZERO, |a, b| a + b))
    }

    /// Diagonal in the computational basis, clipped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.matrix[(i, i)].re.max(0.0))
            .collect()
    }

    fn check_local(&self, u: &ComplexMatrix, qubits: &[usize]) -> Result<()> {
        check_qubits(qubits, self.n_qubits)?;
        if !u.is_square() || u.rows() != 1 << qubits.len() {
            return Err(Error::Dimension(format!(
                "{}x{} operator cannot act on {} qubits",
                u.rows(),
                u.cols(),
                qubits.len()
            )));
        }
        Ok(())
    }
}

pub fn apply_unitary(rho: &DensityMatrix, u: &ComplexMatrix, qubits: &[usize]) -> Result<DensityMatrix> {
    rho.apply_unitary(u, qubits)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

pub fn expectation(rho: &DensityMatrix, obs: &PauliString) -> Result<f64> {
    rho.expectation(obs)
}
