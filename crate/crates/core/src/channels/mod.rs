//! Noise channels in Kraus, Pauli, depolarizing and quasi-local form, with
//! exact twirl averages and Pauli-transfer-matrix comparison.

mod kraus;
mod pauli;
mod twirl;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kraus::{random_cptp, KrausChannel, CPTP_TOL};
pub use pauli::{DepolarizingChannel, PauliChannel, QuasiLocalChannel};
pub use twirl::{
    crosstalk_twirl_average, crosstalk_twirl_operational, marginal_on_active_pair,
    marginal_on_neighbor, neighbor_weights, partial_pauli_twirl, pauli_twirl_average,
    pauli_twirl_operational, rotation_matrix, Axis,
};

use crate::error::{Error, Result};
use crate::linalg::matrix::{check_qubits, ComplexMatrix, C64};
use crate::linalg::{DensityMatrix, PauliString};

#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    Pauli(PauliChannel),
    Depolarizing(DepolarizingChannel),
    QuasiLocal(QuasiLocalChannel),
}

impl Channel {
    pub fn n_qubits(&self) -> usize {
        match self {
            Channel::Kraus(c) => c.n_qubits(),
            Channel::Pauli(c) => c.n_qubits(),
            Channel::Depolarizing(c) => c.n_qubits(),
            Channel::QuasiLocal(c) => c.n_qubits(),
        }
    }

    /// Applies the channel to `targets` of `rho` (`targets[j]` is channel qubit `j`).
    pub fn apply(&self, rho: &mut DensityMatrix, targets: &[usize]) -> Result<()> {
        if targets.len() != self.n_qubits() {
            return Err(Error::Dimension(format!(
                "{}-qubit channel given {} targets",
                self.n_qubits(),
                targets.len()
            )));
        }
        check_qubits(targets, rho.n_qubits())?;
        match self {
            Channel::Kraus(c) => rho.apply_kraus_mut(c.ops(), targets),
            Channel::Depolarizing(c) => rho.depolarize_mut(targets, c.lambda()),
            Channel::Pauli(c) => apply_pauli(c, rho, targets),
            Channel::QuasiLocal(c) => apply_quasi_local(c, rho, targets),
        }
    }

    /// Pauli transfer matrix `R_ij = Tr(P_i E(P_j)) / 2^n`.
    pub fn ptm(&self) -> DMatrix<f64> {
        let n = self.n_qubits();
        let d = (1usize << n) as f64;
        let n_paulis = 1usize << (2 * n);
        let targets: Vec<usize> = (0..n).collect();
        let columns: Vec<Vec<f64>> = (0..n_paulis)
            .into_par_iter()
            .map(|j| {
                let pj = PauliString::from_index(n, j).to_matrix();
                let mut out = DensityMatrix::from_matrix_unchecked(pj).expect("square power of two");
                self.apply(&mut out, &targets).expect("targets match width");
                (0..n_paulis)
                    .map(|i| {
                        let pi = PauliString::from_index(n, i);
                        out.expectation_complex(&pi).expect("same width").re / d
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(n_paulis, n_paulis, |i, j| columns[j][i])
    }
}

impl From<KrausChannel> for Channel {
    fn from(c: KrausChannel) -> Self {
        Channel::Kraus(c)
    }
}

impl From<PauliChannel> for Channel {
    fn from(c: PauliChannel) -> Self {
        Channel::Pauli(c)
    }
}

impl From<DepolarizingChannel> for Channel {
    fn from(c: DepolarizingChannel) -> Self {
        Channel::Depolarizing(c)
    }
}

impl From<QuasiLocalChannel> for Channel {
    fn from(c: QuasiLocalChannel) -> Self {
        Channel::QuasiLocal(c)
    }
}

fn apply_pauli(c: &PauliChannel, rho: &mut DensityMatrix, targets: &[usize]) -> Result<()> {
    let n = c.n_qubits();
    let src = rho.matrix().clone();
    let mut acc = ComplexMatrix::zeros(src.rows(), src.cols());
    for (idx, &p) in c.probabilities().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let pm = PauliString::from_index(n, idx).to_matrix();
        let mut term = src.clone();
        term.conjugate_local(&pm, targets);
        let w = C64::new(p, 0.0);
        for (a, b) in acc.data_mut().iter_mut().zip(term.data()) {
            *a += w * b;
        }
    }
    *rho.matrix_mut() = acc;
    Ok(())
}

fn apply_quasi_local(c: &QuasiLocalChannel, rho: &mut DensityMatrix, targets: &[usize]) -> Result<()> {
    let total = c.lambda_cnot + c.lambda_neigh + c.lambda_glob;
    if total == 0.0 {
        return Ok(());
    }
    let src = rho.clone();
    let mut acc = src.matrix().scale(C64::new(1.0 - total, 0.0));
    let terms: [(f64, &[usize]); 3] = [
        (c.lambda_cnot, &targets[..2]),
        (c.lambda_neigh, &targets[2..]),
        (c.lambda_glob, targets),
    ];
    for (lambda, subset) in terms {
        if lambda == 0.0 {
            continue;
        }
        let mut d = src.clone();
        d.depolarize_mut(subset, 1.0)?;
        let w = C64::new(lambda, 0.0);
        for (a, b) in acc.data_mut().iter_mut().zip(d.matrix().data()) {
            *a += w * b;
        }
    }
    *rho.matrix_mut() = acc;
    Ok(())
}

/// Frobenius norm of the PTM difference.
pub fn ptm_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::Dimension("channels of different width".into()));
    }
    Ok((a.ptm() - b.ptm()).norm())
}

pub fn apply_channel(rho: &DensityMatrix, ch: &Channel, targets: &[usize]) -> Result<DensityMatrix> {
    let mut out = rho.clone();
    ch.apply(&mut out, targets)?;
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ChannelRepr {
    Kraus {
        n_qubits: usize,
        kraus: Vec<Vec<Vec<[f64; 2]>>>,
    },
    Pauli {
        n_qubits: usize,
        probabilities: BTreeMap<String, f64>,
    },
    Depolarizing {
        n_qubits: usize,
        lambda: f64,
    },
    QuasiLocal {
        n_qubits: usize,
        lambda_cnot: f64,
        lambda_neigh: f64,
        lambda_glob: f64,
    },
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            Channel::Kraus(c) => ChannelRepr::Kraus {
                n_qubits: c.n_qubits(),
                kraus: c
                    .ops()
                    .iter()
                    .map(|k| {
                        (0..k.rows())
                            .map(|r| (0..k.cols()).map(|col| [k[(r, col)].re, k[(r, col)].im]).collect())
                            .collect()
                    })
                    .collect(),
            },
            Channel::Pauli(c) => ChannelRepr::Pauli {
                n_qubits: c.n_qubits(),
                probabilities: c
                    .probabilities()
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p != 0.0)
                    .map(|(i, p)| (PauliString::from_index(c.n_qubits(), i).label(), *p))
                    .collect(),
            },
            Channel::Depolarizing(c) => ChannelRepr::Depolarizing {
                n_qubits: c.n_qubits(),
                lambda: c.lambda(),
            },
            Channel::QuasiLocal(c) => ChannelRepr::QuasiLocal {
                n_qubits: c.n_qubits(),
                lambda_cnot: c.lambda_cnot,
                lambda_neigh: c.lambda_neigh,
                lambda_glob: c.lambda_glob,
            },
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ChannelRepr::deserialize(d)?;
        let ch: Result<Channel> = match repr {
            ChannelRepr::Kraus { n_qubits, kraus } => kraus
                .into_iter()
                .map(|rows| {
                    let r = rows.len();
                    let c = rows.first().map_or(0, Vec::len);
                    let data = rows.into_iter().flatten().map(|[re, im]| C64::new(re, im)).collect();
                    ComplexMatrix::from_vec(r, c, data)
                })
                .collect::<Result<Vec<_>>>()
                .and_then(KrausChannel::new)
                .and_then(|k| {
                    if k.n_qubits() == n_qubits {
                        Ok(k.into())
                    } else {
                        Err(Error::InvalidChannel("n_qubits does not match Kraus size".into()))
                    }
                }),
            ChannelRepr::Pauli {
                n_qubits,
                probabilities,
            } => {
                let mut probs = vec![0.0; 1 << (2 * n_qubits)];
                let mut res = Ok(());
                for (label, p) in probabilities {
                    match label.parse::<PauliString>() {
                        Ok(ps) if ps.n_qubits() == n_qubits => probs[ps.index()] = p,
                        _ => res = Err(Error::InvalidChannel(format!("bad Pauli label {label:?}"))),
                    }
                }
                res.and_then(|_| PauliChannel::new(n_qubits, probs).map(Into::into))
            }
            ChannelRepr::Depolarizing { n_qubits, lambda } => {
                DepolarizingChannel::new(n_qubits, lambda).map(Into::into)
            }
            ChannelRepr::QuasiLocal {
                n_qubits,
                lambda_cnot,
                lambda_neigh,
                lambda_glob,
            } => {
                if n_qubits < 2 {
                    Err(Error::InvalidChannel("quasi-local channel needs ≥ 2 qubits".into()))
                } else {
                    QuasiLocalChannel::with_neighbors(lambda_cnot, lambda_neigh, lambda_glob, n_qubits - 2)
                        .map(Into::into)
                }
            }
        };
        ch.map_err(D::Error::custom)
    }
}
