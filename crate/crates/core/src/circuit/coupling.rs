use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected set of physical junctions on which CNOTs are allowed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingMap {
    n_qubits: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl CouplingMap {
    pub fn new(n_qubits: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::QubitIndex(format!("self-loop on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::QubitIndex(format!(
                    "edge ({a}, {b}) outside {n_qubits} qubits"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n_qubits,
            edges: set,
        })
    }

    /// Chain `0 - 1 - ... - n-1`.
    pub fn linear(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            edges: (1..n_qubits).map(|q| (q - 1, q)).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == q {
                    Some(b)
                } else if b == q {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}
