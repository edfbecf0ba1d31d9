//! Twirl averages. Every average has a closed-form route (trace formula over
//! the Kraus operators) and an operational route (the explicit Kraus set of the
//! conjugated channel averaged over the whole twirl group).

use serde::{Deserialize, Serialize};

use super::kraus::KrausChannel;
use super::pauli::{DepolarizingChannel, PauliChannel};
use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64};
use crate::linalg::{Pauli, PauliString};

/// Rotation axis of the neighbour twirl set.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

/// `R_k(θ) = e^{−i(θ/2)σ^k}`.
pub fn rotation_matrix(axis: Axis, theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    &ComplexMatrix::identity(2).scale(C64::new(c, 0.0)) + &axis.pauli().matrix().scale(C64::new(0.0, -s))
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Closed form: `p(P) = 4^{−n} Σ_M |Tr(M P)|²`.
pub fn pauli_twirl_average(ch: &KrausChannel) -> PauliChannel {
    let n = ch.n_qubits();
    let norm = (1u64 << (2 * n)) as f64;
    let probs = PauliString::all(n)
        .map(|p| {
            let pm = p.to_matrix();
            ch.ops().iter().map(|m| trace_product(m, &pm).norm_sqr()).sum::<f64>() / norm
        })
        .collect();
    PauliChannel::new_unchecked(n, probs)
}

/// Kraus set of `4^{−n} Σ_T T E(T ρ T) T`.
pub fn pauli_twirl_operational(ch: &KrausChannel) -> KrausChannel {
    let all: Vec<usize> = (0..ch.n_qubits()).collect();
    partial_pauli_twirl(ch, &all)
}

/// Pauli twirl restricted to the listed qubits; others are left untouched.
pub fn partial_pauli_twirl(ch: &KrausChannel, qubits: &[usize]) -> KrausChannel {
    let n = ch.n_qubits();
    let scale = C64::new(1.0 / (1u64 << qubits.len()) as f64, 0.0);
    let mut ops = Vec::with_capacity(ch.ops().len() << (2 * qubits.len()));
    for idx in 0..1usize << (2 * qubits.len()) {
        let sub = PauliString::from_index(qubits.len(), idx);
        let terms: Vec<(usize, Pauli)> = qubits.iter().zip(sub.factors()).map(|(q, f)| (*q, *f)).collect();
        let t = PauliString::from_sparse(n, &terms).to_matrix();
        for m in ch.ops() {
            ops.push((&(&t * m) * &t).scale(scale));
        }
    }
    KrausChannel::new_unchecked(n, ops)
}

/// Every assignment of a rotation axis to each neighbour, as full-width
/// operators `⊗ R_{k}(π/2)` (identity on the active pair).
fn neighbor_rotations(n: usize) -> Vec<ComplexMatrix> {
    let nb = n - 2;
    let mut out = Vec::with_capacity(3usize.pow(nb as u32));
    for code in 0..3usize.pow(nb as u32) {
        // Qubit 0 is least significant, so build the Kronecker product from the top.
        let mut m = ComplexMatrix::identity(1);
        let mut axes = Vec::with_capacity(nb);
        let mut c = code;
        for _ in 0..nb {
            axes.push(Axis::ALL[c % 3]);
            c /= 3;
        }
        for axis in axes.iter().rev() {
            m = m.kron(&rotation_matrix(*axis, std::f64::consts::FRAC_PI_2));
        }
        out.push(m.kron(&ComplexMatrix::identity(4)));
    }
    out
}

/// Closed form for the crosstalk twirl of a channel on `[i, j, k…]`:
/// `p(P) = 4^{−n} 3^{−(n−2)} Σ_{M,R} |Tr(M R P R†)|²`, with `R` ranging over
/// the π/2 rotations on the neighbour qubits.
pub fn crosstalk_twirl_average(ch: &KrausChannel) -> Result<PauliChannel> {
    let n = ch.n_qubits();
    if n < 3 {
        return Err(Error::InvalidChannel(
            "crosstalk twirl needs an active pair and at least one neighbour".into(),
        ));
    }
    let rots = neighbor_rotations(n);
    let norm = (1u64 << (2 * n)) as f64 * rots.len() as f64;
    let probs = PauliString::all(n)
        .map(|p| {
            let pm = p.to_matrix();
            let mut acc = 0.0;
            for r in &rots {
                let rpr = &(r * &pm) * &r.dagger();
                for m in ch.ops() {
                    acc += trace_product(m, &rpr).norm_sqr();
                }
            }
            acc / norm
        })
        .collect();
    Ok(PauliChannel::new_unchecked(n, probs))
}

/// Kraus set of the exhaustive crosstalk twirl: for every Pauli `T` on all
/// qubits and rotation choice `R` on the neighbours, `V = R·T` is applied
/// before the noise and `V†` after.
pub fn crosstalk_twirl_operational(ch: &KrausChannel) -> Result<KrausChannel> {
    let n = ch.n_qubits();
    if n < 3 {
        return Err(Error::InvalidChannel(
            "crosstalk twirl needs an active pair and at least one neighbour".into(),
        ));
    }
    let rots = neighbor_rotations(n);
    let scale = C64::new(
        1.0 / ((1u64 << n) as f64 * (rots.len() as f64).sqrt()),
        0.0,
    );
    let mut ops = Vec::new();
    for t in PauliString::all(n) {
        let tm = t.to_matrix();
        for r in &rots {
            let v = r * &tm;
            let vd = v.dagger();
            for m in ch.ops() {
                ops.push((&(&vd * m) * &v).scale(scale));
            }
        }
    }
    Ok(KrausChannel::new_unchecked(n, ops))
}

/// Weights `(I, X, Y, Z)` of the single-qubit marginal on `qubit`.
pub fn neighbor_weights(ch: &PauliChannel, qubit: usize) -> [f64; 4] {
    let m = ch.marginal(&[qubit]);
    let p = m.probabilities();
    [p[0], p[1], p[2], p[3]]
}

/// Depolarizing form of the neighbour marginal, `λ_b = 4 q_b / 3` with
/// `q_b` the total non-identity weight. Fails if the three weights differ.
pub fn marginal_on_neighbor(ch: &PauliChannel, qubit: usize) -> Result<DepolarizingChannel> {
    let w = neighbor_weights(ch, qubit);
    let spread = w[1..].iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        - w[1..].iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if spread > 1e-10 {
        return Err(Error::InvalidChannel(format!(
            "neighbour marginal is not depolarizing: weights {w:?}"
        )));
    }
    let q = w[1] + w[2] + w[3];
    DepolarizingChannel::new(1, 4.0 * q / 3.0)
}

/// Two-qubit Pauli marginal on the active pair (channel qubits 0 and 1).
pub fn marginal_on_active_pair(ch: &PauliChannel) -> PauliChannel {
    ch.marginal(&[0, 1])
}
