//! Parity observables read from one basis setting of the measured register.

use serde::{Deserialize, Serialize};

use crate::circuit::Basis;
use crate::error::{Error, Result};
use crate::linalg::{Pauli, PauliString};

/// Product of the measured axes on a subset of logical qubits, labelled like
/// `X0Z2`. `bits` index the measurement order, which is logical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub label: String,
    pub bits: Vec<usize>,
    pub pauli: PauliString,
}

fn pauli_of(b: Basis) -> Pauli {
    match b {
        Basis::X => Pauli::X,
        Basis::Y => Pauli::Y,
        Basis::Z => Pauli::Z,
    }
}

impl Observable {
    pub fn new(bases: &[Basis], bits: Vec<usize>) -> Result<Self> {
        if bits.is_empty() || bits.iter().any(|&b| b >= bases.len()) {
            return Err(Error::QubitIndex(format!(
                "observable bits {bits:?} outside {} measured qubits",
                bases.len()
            )));
        }
        let label = bits
            .iter()
            .map(|&b| format!("{}{b}", bases[b].label()))
            .collect();
        let terms: Vec<(usize, Pauli)> = bits.iter().map(|&b| (b, pauli_of(bases[b]))).collect();
        Ok(Self {
            label,
            pauli: PauliString::from_sparse(bases.len(), &terms),
            bits,
        })
    }

    /// Parses a label such as `X0Y1` against the basis setting.
    pub fn parse(bases: &[Basis], label: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad observable label {label:?}"),
        };
        let mut bits = Vec::new();
        let mut chars = label.chars().peekable();
        while let Some(c) = chars.next() {
            let axis = Basis::from_char(c).ok_or_else(bad)?;
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            let q: usize = digits.parse().map_err(|_| bad())?;
            if bases.get(q) != Some(&axis) {
                return Err(Error::Config {
                    path: "observables".into(),
                    msg: format!("{label} needs qubit {q} measured in {}", axis.label()),
                });
            }
            bits.push(q);
        }
        Self::new(bases, bits)
    }
}

/// Every non-empty subset of the measured qubits, by size then lexicographically:
/// three qubits give 3 singles, 3 pairs and 1 triple.
pub fn all_observables(bases: &[Basis]) -> Vec<Observable> {
    let m = bases.len();
    let mut subsets: Vec<Vec<usize>> = (1usize..1 << m)
        .map(|mask| (0..m).filter(|b| mask >> b & 1 == 1).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
        .into_iter()
        .map(|bits| Observable::new(bases, bits).expect("bits within range"))
        .collect()
}

pub fn parse_bases(s: &str) -> Result<Vec<Basis>> {
    s.chars()
        .map(|c| {
            Basis::from_char(c).ok_or_else(|| Error::Config {
                path: "experiments.bases".into(),
                msg: format!("basis {c:?} is not one of X, Y, Z"),
            })
        })
        .collect()
}
