use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logical → physical qubit assignment, updated as SWAPs are inserted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutTracker {
    to_physical: Vec<usize>,
}

impl LayoutTracker {
    pub fn identity(n: usize) -> Self {
        Self {
            to_physical: (0..n).collect(),
        }
    }

    /// `perm[logical] = physical`; must be a bijection.
    pub fn from_permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::QubitIndex(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(Self { to_physical: perm })
    }

    pub fn len(&self) -> usize {
        self.to_physical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_physical.is_empty()
    }

    pub fn physical(&self, logical: usize) -> usize {
        self.to_physical[logical]
    }

    pub fn logical(&self, physical: usize) -> usize {
        self.to_physical
            .iter()
            .position(|&p| p == physical)
            .expect("layout is a bijection")
    }

    pub fn permutation(&self) -> &[usize] {
        &self.to_physical
    }

    /// Records a SWAP of the contents of two physical qubits.
    pub fn swap_physical(&mut self, a: usize, b: usize) {
        for p in self.to_physical.iter_mut() {
            if *p == a {
                *p = b;
            } else if *p == b {
                *p = a;
            }
        }
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (l, &p) in self.to_physical.iter().enumerate() {
            inv[p] = l;
        }
        Self { to_physical: inv }
    }
}
