use log::warn;

use crate::error::{Error, Result};
use crate::linalg::PauliString;

/// Stochastic Pauli channel `ρ ↦ Σ_P p(P) P ρ P`, indexed by
/// [`PauliString::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct PauliChannel {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl PauliChannel {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << (2 * n_qubits) {
            return Err(Error::InvalidChannel(format!(
                "{} probabilities for {n_qubits} qubits",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::InvalidChannel("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidChannel(format!("probabilities sum to {total}")));
        }
        Ok(Self { n_qubits, probs })
    }

    pub(crate) fn new_unchecked(n_qubits: usize, probs: Vec<f64>) -> Self {
        Self { n_qubits, probs }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let mut probs = vec![0.0; 1 << (2 * n_qubits)];
        probs[0] = 1.0;
        Self { n_qubits, probs }
    }

    /// Uniform weight on every Pauli supported inside `subset`.
    pub fn full_depolarizing_on(n_qubits: usize, subset: &[usize]) -> Self {
        let mut probs = vec![0.0; 1 << (2 * n_qubits)];
        let w = 1.0 / (1u64 << (2 * subset.len())) as f64;
        for p in PauliString::all(n_qubits) {
            let inside = p
                .factors()
                .iter()
                .enumerate()
                .all(|(q, f)| subset.contains(&q) || *f == crate::linalg::Pauli::I);
            if inside {
                probs[p.index()] = w;
            }
        }
        Self { n_qubits, probs }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, p: &PauliString) -> f64 {
        self.probs[p.index()]
    }

    /// Pauli channel on the listed qubits obtained by tracing out the others.
    pub fn marginal(&self, keep: &[usize]) -> PauliChannel {
        let mut probs = vec![0.0; 1 << (2 * keep.len())];
        for (idx, p) in self.probs.iter().enumerate() {
            let label = PauliString::from_index(self.n_qubits, idx);
            let sub: usize = keep
                .iter()
                .enumerate()
                .map(|(j, &q)| label.factors()[q].index() << (2 * j))
                .sum();
            probs[sub] += p;
        }
        PauliChannel::new_unchecked(keep.len(), probs)
    }

    /// Mixture `Σ w_i C_i` of channels of equal width.
    pub fn mix(parts: &[(f64, &PauliChannel)]) -> PauliChannel {
        let n = parts[0].1.n_qubits;
        let mut probs = vec![0.0; 1 << (2 * n)];
        for (w, ch) in parts {
            for (a, b) in probs.iter_mut().zip(&ch.probs) {
                *a += w * b;
            }
        }
        PauliChannel::new_unchecked(n, probs)
    }
}

/// `ρ ↦ (1 − λ)ρ + λ I/2^n` on the target qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DepolarizingChannel {
    n_qubits: usize,
    lambda: f64,
}

impl DepolarizingChannel {
    /// Accepts `0 ≤ λ ≤ 4^n/(4^n − 1)`; values above 1 are CPTP but log a warning.
    pub fn new(n_qubits: usize, lambda: f64) -> Result<Self> {
        let d2 = (1u64 << (2 * n_qubits)) as f64;
        let max = d2 / (d2 - 1.0);
        if !(0.0..=max + 1e-12).contains(&lambda) {
            return Err(Error::InvalidChannel(format!(
                "depolarizing parameter {lambda} outside [0, {max}]"
            )));
        }
        if lambda > 1.0 {
            warn!("depolarizing parameter {lambda} > 1 overshoots the maximally mixed state");
        }
        Ok(Self { n_qubits, lambda })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn to_pauli(&self) -> PauliChannel {
        let all: Vec<usize> = (0..self.n_qubits).collect();
        PauliChannel::mix(&[
            (1.0 - self.lambda, &PauliChannel::identity(self.n_qubits)),
            (self.lambda, &PauliChannel::full_depolarizing_on(self.n_qubits, &all)),
        ])
    }
}

/// Depolarizing noise attached to one CNOT junction: with targets
/// `[i, j, k…]`,
/// `ρ ↦ (1 − Σλ)ρ + λ_cnot D_{ij}(ρ) + λ_neigh D_{k…}(ρ) + λ_glob D_{ijk…}(ρ)`
/// where `D_S` replaces the qubits in `S` by the maximally mixed state.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiLocalChannel {
    pub lambda_cnot: f64,
    pub lambda_neigh: f64,
    pub lambda_glob: f64,
    n_neighbors: usize,
}

impl QuasiLocalChannel {
    pub fn new(lambda_cnot: f64, lambda_neigh: f64, lambda_glob: f64) -> Result<Self> {
        Self::with_neighbors(lambda_cnot, lambda_neigh, lambda_glob, 1)
    }

    pub fn with_neighbors(
        lambda_cnot: f64,
        lambda_neigh: f64,
        lambda_glob: f64,
        n_neighbors: usize,
    ) -> Result<Self> {
        let ls = [lambda_cnot, lambda_neigh, lambda_glob];
        if ls.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidChannel(format!("rates must be non-negative, got {ls:?}")));
        }
        let total: f64 = ls.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidChannel(format!("rates sum to {total} > 1")));
        }
        Ok(Self {
            lambda_cnot,
            lambda_neigh,
            lambda_glob,
            n_neighbors,
        })
    }

    pub fn n_neighbors(&self) -> usize {
        self.n_neighbors
    }

    pub fn n_qubits(&self) -> usize {
        2 + self.n_neighbors
    }

    pub fn to_pauli(&self) -> PauliChannel {
        let n = self.n_qubits();
        let all: Vec<usize> = (0..n).collect();
        let total = self.lambda_cnot + self.lambda_neigh + self.lambda_glob;
        PauliChannel::mix(&[
            (1.0 - total, &PauliChannel::identity(n)),
            (self.lambda_cnot, &PauliChannel::full_depolarizing_on(n, &[0, 1])),
            (self.lambda_neigh, &PauliChannel::full_depolarizing_on(n, &all[2..])),
            (self.lambda_glob, &PauliChannel::full_depolarizing_on(n, &all)),
        ])
    }
}
