use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::eigen::hermitian_eigen;
use crate::linalg::matrix::{ComplexMatrix, C64};

/// Completeness tolerance `‖Σ K†K − I‖_max`.
pub const CPTP_TOL: f64 = 1e-10;

/// Channel in Kraus form, `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    n_qubits: usize,
    ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::NotCptp("no Kraus operators".into()))?;
        let dim = first.rows();
        if !first.is_square() || !dim.is_power_of_two() {
            return Err(Error::NotCptp(format!(
                "Kraus operators must be 2^n x 2^n, got {}x{}",
                first.rows(),
                first.cols()
            )));
        }
        if ops.iter().any(|k| k.rows() != dim || k.cols() != dim) {
            return Err(Error::NotCptp("Kraus operators differ in size".into()));
        }
        let ch = Self {
            n_qubits: dim.trailing_zeros() as usize,
            ops,
        };
        let dev = ch.completeness_error();
        if dev > CPTP_TOL {
            return Err(Error::NotCptp(format!("Σ K†K deviates from I by {dev:e}")));
        }
        Ok(ch)
    }

    pub(crate) fn new_unchecked(n_qubits: usize, ops: Vec<ComplexMatrix>) -> Self {
        Self { n_qubits, ops }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::unitary(ComplexMatrix::identity(1 << n_qubits))
    }

    /// Single-operator channel; `u` is assumed unitary.
    pub fn unitary(u: ComplexMatrix) -> Self {
        let n_qubits = u.rows().trailing_zeros() as usize;
        Self {
            n_qubits,
            ops: vec![u],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn completeness_error(&self) -> f64 {
        let dim = 1 << self.n_qubits;
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for k in &self.ops {
            sum = &sum + &(&k.dagger() * k);
        }
        sum.max_abs_diff(&ComplexMatrix::identity(dim))
    }

    /// Kraus operators of `other ∘ self`.
    pub fn then(&self, other: &KrausChannel) -> Result<KrausChannel> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension("composing channels of different width".into()));
        }
        let ops = other
            .ops
            .iter()
            .flat_map(|b| self.ops.iter().map(move |a| b * a))
            .collect();
        Ok(Self::new_unchecked(self.n_qubits, ops))
    }
}

/// Random CPTP channel: Gaussian complex matrices `G_k`, normalized as
/// `K_k = G_k S^{−1/2}` with `S = Σ G_k†G_k`.
pub fn random_cptp<R: Rng + ?Sized>(n_qubits: usize, n_ops: usize, rng: &mut R) -> KrausChannel {
    let dim = 1 << n_qubits;
    let gs: Vec<ComplexMatrix> = (0..n_ops.max(1))
        .map(|_| {
            ComplexMatrix::from_fn(dim, dim, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            })
        })
        .collect();
    let mut s = ComplexMatrix::zeros(dim, dim);
    for g in &gs {
        s = &s + &(&g.dagger() * g);
    }
    // Symmetrize away rounding before the eigensolver's Hermiticity check.
    let s = (&s + &s.dagger()).scale(C64::new(0.5, 0.0));
    let (values, vectors) = hermitian_eigen(&s).expect("Gram matrix is Hermitian");
    let inv_sqrt: Vec<C64> = values.iter().map(|v| C64::new(v.sqrt().recip(), 0.0)).collect();
    let s_inv_half = &(&vectors * &ComplexMatrix::diagonal(&inv_sqrt)) * &vectors.dagger();
    let ops = gs.iter().map(|g| g * &s_inv_half).collect();
    KrausChannel::new(ops).expect("normalized Kraus set is complete")
}
