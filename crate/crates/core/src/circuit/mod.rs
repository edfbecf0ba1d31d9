//! Gate-level circuits over the native set {RZ, SX, X, CNOT} plus generic U gates.

mod coupling;
mod gate;
mod layout;
mod text;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use coupling::CouplingMap;
pub use gate::{cnot_matrix, decompose_swap, rz_matrix, swap_matrix, u_matrix, Gate};
pub use layout::LayoutTracker;

use crate::error::{Error, Result};
use crate::linalg::matrix::{check_qubits, ComplexMatrix};

/// Largest register for which dense unitaries are built.
pub const MAX_UNITARY_QUBITS: usize = 6;

/// Measurement axis for one qubit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub fn label(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Basis> {
        match c {
            'X' => Some(Basis::X),
            'Y' => Some(Basis::Y),
            'Z' => Some(Basis::Z),
            _ => None,
        }
    }

    /// Native gates mapping this axis onto Z.
    pub fn rotation(self, qubit: usize) -> Vec<Gate> {
        match self {
            Basis::X => vec![Gate::rz(qubit, FRAC_PI_2), Gate::sx(qubit), Gate::rz(qubit, FRAC_PI_2)],
            Basis::Y => vec![Gate::sx(qubit), Gate::rz(qubit, FRAC_PI_2)],
            Basis::Z => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    measure_basis: Vec<Option<Basis>>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            measure_basis: vec![None; n_qubits],
        }
    }

    pub fn from_gates(n_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Self::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check()?;
        check_qubits(&gate.qubits(), self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Appends the gates (not the measurement settings) of `other`.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "cannot append a {}-qubit circuit to a {}-qubit one",
                other.n_qubits, self.n_qubits
            )));
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    pub fn measure(&mut self, qubit: usize, basis: Basis) -> Result<()> {
        check_qubits(&[qubit], self.n_qubits)?;
        self.measure_basis[qubit] = Some(basis);
        Ok(())
    }

    pub fn measure_basis(&self) -> &[Option<Basis>] {
        &self.measure_basis
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|&q| self.measure_basis[q].is_some())
            .collect()
    }

    pub fn count_cnots(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    /// CNOT junctions not present in `map`, in circuit order.
    pub fn validate(&self, map: &CouplingMap) -> Vec<(usize, usize)> {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::Cnot { control, target } if !map.contains(*control, *target) => {
                    Some((*control, *target))
                }
                _ => None,
            })
            .collect()
    }

    /// CNOT/barrier skeleton in original order.
    pub fn strip_single_qubit_gates(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self
                .gates
                .iter()
                .filter(|g| !g.is_single_qubit())
                .cloned()
                .collect(),
            measure_basis: self.measure_basis.clone(),
        }
    }

    /// Reversed circuit of inverted gates; equal to `U†` up to global phase.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            measure_basis: self.measure_basis.clone(),
        }
    }

    /// Appends the rotations that bring every measured axis onto Z; the
    /// returned circuit measures those qubits in Z.
    pub fn append_basis_rotation(&self) -> Circuit {
        let mut out = self.clone();
        for q in 0..self.n_qubits {
            if let Some(b) = self.measure_basis[q] {
                out.gates.extend(b.rotation(q));
                out.measure_basis[q] = Some(Basis::Z);
            }
        }
        out
    }

    /// Product of all gate matrices in application order; measurement is ignored.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        if self.n_qubits > MAX_UNITARY_QUBITS {
            return Err(Error::CircuitTooLarge(self.n_qubits, MAX_UNITARY_QUBITS));
        }
        let mut u = ComplexMatrix::identity(1 << self.n_qubits);
        for g in &self.gates {
            if let Some(m) = g.matrix() {
                u.apply_left_local(&m, &g.qubits());
            }
        }
        Ok(u)
    }

    /// If the CNOTs of this circuit compose to a qubit permutation, returns it
    /// as a layout mapping each input qubit to the output position holding it.
    /// Single-qubit gates are ignored.
    pub fn cnot_permutation(&self) -> Option<LayoutTracker> {
        // Row q holds the GF(2) combination of input bits now stored on qubit q.
        let mut rows: Vec<u64> = (0..self.n_qubits).map(|q| 1u64 << q).collect();
        for g in &self.gates {
            if let Gate::Cnot { control, target } = g {
                rows[*target] ^= rows[*control];
            }
        }
        let mut perm = vec![usize::MAX; self.n_qubits];
        for (out, row) in rows.iter().enumerate() {
            if row.count_ones() != 1 {
                return None;
            }
            perm[row.trailing_zeros() as usize] = out;
        }
        LayoutTracker::from_permutation(perm).ok()
    }

    /// Serializes to the line-oriented text format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(s: &str) -> Result<Circuit> {
        s.parse()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::write(self, f)
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        text::parse(s)
    }
}

pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    c.unitary()
}

pub fn strip_single_qubit_gates(c: &Circuit) -> Circuit {
    c.strip_single_qubit_gates()
}

pub fn count_cnots(c: &Circuit) -> usize {
    c.count_cnots()
}

pub fn append_basis_rotation(c: &Circuit) -> Circuit {
    c.append_basis_rotation()
}

pub fn validate(c: &Circuit, map: &CouplingMap) -> Vec<(usize, usize)> {
    c.validate(map)
}

/// Permutation matrix sending qubit `l` to `layout.physical(l)`.
pub fn permutation_unitary(layout: &LayoutTracker) -> ComplexMatrix {
    let n = layout.len();
    let dim = 1 << n;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for b in 0..dim {
        let image: usize = (0..n)
            .filter(|&l| (b >> l) & 1 == 1)
            .map(|l| 1 << layout.physical(l))
            .sum();
        m[(image, b)] = crate::linalg::matrix::ONE;
    }
    m
}
