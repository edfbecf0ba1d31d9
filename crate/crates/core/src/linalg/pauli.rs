use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, I, ONE, ZERO};
use crate::error::{Error, Result};

/// Single-qubit Pauli label.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Pauli {
        Self::ALL[i & 3]
    }

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => ComplexMatrix::identity(2),
            Pauli::X => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
            Pauli::Z => ComplexMatrix::diagonal(&[ONE, -ONE]),
        }
    }

    /// Product `self · other` as (phase exponent of i, label).
    pub fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Global phase of a Pauli string, one of {+1, +i, −1, −i}.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// `i^k`.
    pub fn from_power(k: u8) -> Phase {
        Phase(k & 3)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn value(self) -> C64 {
        match self.0 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        }
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn mul(self, other: Phase) -> Phase {
        Phase::from_power(self.0 + other.0)
    }

    /// Recovers a phase from a complex number close to a fourth root of unity.
    pub fn from_complex(z: C64, tol: f64) -> Option<Phase> {
        (0..4u8).map(Phase).find(|p| (p.value() - z).norm() <= tol)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })
    }
}

/// An n-qubit Pauli operator with phase.
///
/// `factors[q]` acts on qubit `q`; the text label lists qubit 0 first, so
/// `"XIZ"` is X on qubit 0 and Z on qubit 2.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    factors: Vec<Pauli>,
    phase: Phase,
}

impl PauliString {
    pub fn new(factors: Vec<Pauli>, phase: Phase) -> Self {
        Self { factors, phase }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![Pauli::I; n], Phase::ONE)
    }

    /// Product of single-qubit factors on the given qubits, identity elsewhere.
    pub fn from_sparse(n: usize, terms: &[(usize, Pauli)]) -> Self {
        let mut p = Self::identity(n);
        for &(q, f) in terms {
            p.factors[q] = f;
        }
        p
    }

    /// Base-4 index with qubit `q` in digit `q` (I=0, X=1, Y=2, Z=3).
    pub fn from_index(n: usize, index: usize) -> Self {
        let factors = (0..n).map(|q| Pauli::from_index(index >> (2 * q))).collect();
        Self::new(factors, Phase::ONE)
    }

    pub fn index(&self) -> usize {
        self.factors
            .iter()
            .enumerate()
            .map(|(q, p)| p.index() << (2 * q))
            .sum()
    }

    /// All `4^n` phase-free Pauli strings in index order.
    pub fn all(n: usize) -> impl Iterator<Item = PauliString> {
        (0..1usize << (2 * n)).map(move |i| PauliString::from_index(n, i))
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Pauli] {
        &self.factors
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn weight(&self) -> usize {
        self.factors.iter().filter(|p| **p != Pauli::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .factors
            .iter()
            .zip(&other.factors)
            .filter(|(a, b)| !a.commutes_with(**b))
            .count();
        anti % 2 == 0
    }

    /// Product `self · other` with exact phase tracking.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits() != other.n_qubits() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}- and {}-qubit Pauli strings",
                self.n_qubits(),
                other.n_qubits()
            )));
        }
        let mut power = self.phase.power() + other.phase.power();
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| {
                let (k, p) = a.mul(*b);
                power += k;
                p
            })
            .collect();
        Ok(PauliString::new(factors, Phase::from_power(power)))
    }

    /// Dense `2^n × 2^n` matrix, qubit 0 least significant.
    pub fn to_matrix(&self) -> ComplexMatrix {
        let m = self
            .factors
            .iter()
            .rev()
            .fold(ComplexMatrix::identity(1), |acc, p| acc.kron(&p.matrix()));
        m.scale(self.phase.value())
    }

    /// Bit mask of qubits whose factor flips the computational basis (X or Y).
    pub(crate) fn flip_mask(&self) -> usize {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::X | Pauli::Y))
            .map(|(q, _)| 1 << q)
            .sum()
    }

    /// Amplitude `c` in `P|b⟩ = c |b ⊕ flip_mask⟩`.
    pub(crate) fn basis_phase(&self, b: usize) -> C64 {
        let mut power = self.phase.power();
        for (q, p) in self.factors.iter().enumerate() {
            let bit = (b >> q) & 1;
            match (p, bit) {
                (Pauli::Y, 0) => power += 1,
                (Pauli::Y, _) => power += 3,
                (Pauli::Z, 1) => power += 2,
                _ => {}
            }
        }
        Phase::from_power(power).value()
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|p| p.label()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.phase != Phase::ONE {
            write!(f, "{}", self.phase)?;
        }
        f.write_str(&self.label())
    }
}

/// Serialized as its label, e.g. `"-XIZ"`.
impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts an optional phase prefix (`+`, `-`, `i`, `+i`, `-i`) followed by
    /// one letter per qubit.
    fn from_str(s: &str) -> Result<Self> {
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (Phase::MINUS_I, rest)
        } else if let Some(rest) = s.strip_prefix("+i") {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (Phase::I, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (Phase::MINUS_ONE, rest)
        } else if let Some(rest) = s.strip_prefix('+') {
            (Phase::ONE, rest)
        } else {
            (Phase::ONE, s)
        };
        let factors = body
            .chars()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("invalid Pauli letter {c:?} in {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if factors.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "empty Pauli string".into(),
            });
        }
        Ok(PauliString::new(factors, phase))
    }
}

pub fn pauli_to_matrix(p: &PauliString) -> ComplexMatrix {
    p.to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_z_matrix() {
        let p: PauliString = "Z".parse().unwrap();
        assert_eq!(p.to_matrix(), ComplexMatrix::diagonal(&[ONE, -ONE]));
    }

    #[test]
    fn xi_is_x_on_qubit_zero() {
        let p: PauliString = "XI".parse().unwrap();
        let expected = ComplexMatrix::identity(2).kron(&Pauli::X.matrix());
        assert_eq!(p.to_matrix(), expected);
    }

    #[test]
    fn minus_i_y() {
        let p: PauliString = "-iY".parse().unwrap();
        assert_eq!(p.to_matrix(), Pauli::Y.matrix().scale(-I));
        assert!(!p.is_hermitian());
    }

    #[test]
    fn group_structure_exhaustive_one_and_two_qubits() {
        for n in 1..=2 {
            let phases = [Phase::ONE, Phase::I, Phase::MINUS_ONE, Phase::MINUS_I];
            for a in PauliString::all(n) {
                for b in PauliString::all(n) {
                    for (pa, pb) in [(phases[0], phases[1]), (phases[2], phases[3])] {
                        let a = a.clone().with_phase(pa);
                        let b = b.clone().with_phase(pb);
                        let prod = a.mul(&b).unwrap();
                        let dense = &a.to_matrix() * &b.to_matrix();
                        assert!(prod.to_matrix().max_abs_diff(&dense) < 1e-15, "{a} * {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn index_roundtrip() {
        for i in 0..64 {
            assert_eq!(PauliString::from_index(3, i).index(), i);
        }
    }

    #[test]
    fn basis_action_matches_matrix() {
        for p in PauliString::all(3) {
            let p = p.with_phase(Phase::MINUS_I);
            let m = p.to_matrix();
            for b in 0..8 {
                let target = b ^ p.flip_mask();
                assert!((m[(target, b)] - p.basis_phase(b)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn commutation() {
        let xx: PauliString = "XX".parse().unwrap();
        let zz: PauliString = "ZZ".parse().unwrap();
        let zi: PauliString = "ZI".parse().unwrap();
        assert!(xx.commutes_with(&zz));
        assert!(!xx.commutes_with(&zi));
    }

    #[test]
    fn display_roundtrip() {
        for s in ["XYZ", "-ZZ", "+iX", "-iIY"] {
            let p: PauliString = s.parse().unwrap();
            let back: PauliString = p.to_string().parse().unwrap();
            assert_eq!(p, back);
        }
    }
}
