use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{simulate, NoiseModel};
use crate::circuit::{Basis, Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::eigen::condition_number;
use crate::linalg::DensityMatrix;

pub const UNFOLD_ITERATIONS: usize = 20;
/// Early stop once successive iterates differ by less than this in total variation.
pub const UNFOLD_TOL: f64 = 1e-8;
/// Confusion matrices beyond this 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e10;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Column-stochastic readout matrix, `A[(measured, true)]`. Bit `k` of an
/// index is the `k`-th measured qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    n_bits: usize,
    matrix: DMatrix<f64>,
}

impl ConfusionMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        if !dim.is_power_of_two() || matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "confusion matrix must be 2^m square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite() || *v < -STOCHASTIC_TOL) {
            return Err(Error::InvalidChannel("confusion matrix has negative entries".into()));
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidChannel(format!("confusion column {j} sums to {s}")));
            }
        }
        Ok(Self {
            n_bits: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn identity(n_bits: usize) -> Self {
        Self {
            n_bits,
            matrix: DMatrix::identity(1 << n_bits, 1 << n_bits),
        }
    }

    /// `factors[k]` is the 2×2 matrix of measured bit `k`.
    pub fn from_factors(factors: &[DMatrix<f64>]) -> Result<Self> {
        let mut m = DMatrix::from_element(1, 1, 1.0);
        for f in factors {
            if f.shape() != (2, 2) {
                return Err(Error::Dimension("per-qubit confusion factors must be 2x2".into()));
            }
            m = f.kronecker(&m);
        }
        Self::new(m)
    }

    /// Independent flips: `p01 = P(read 1 | 0)`, `p10 = P(read 0 | 1)`.
    pub fn from_flips(flips: &[(f64, f64)]) -> Result<Self> {
        let factors: Vec<DMatrix<f64>> = flips
            .iter()
            .map(|&(p01, p10)| DMatrix::from_row_slice(2, 2, &[1.0 - p01, p10, p01, 1.0 - p10]))
            .collect();
        Self::from_factors(&factors)
    }

    pub fn symmetric(n_bits: usize, p: f64) -> Result<Self> {
        Self::from_flips(&vec![(p, p); n_bits])
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Measured distribution `A p` for a true distribution `p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)] * p[j]).sum())
            .collect()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.matrix)
    }
}

impl Serialize for ConfusionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self
            .matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfusionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("confusion matrix rows must be square"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        ConfusionMatrix::new(DMatrix::from_row_slice(n, n, &flat)).map_err(serde::de::Error::custom)
    }
}

/// Readout error of the device, by physical qubit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReadoutModel {
    #[default]
    Ideal,
    /// `(p01, p10)` per physical qubit.
    PerQubit(Vec<(f64, f64)>),
    /// Full matrix over the measured qubits, in measurement order.
    Full(ConfusionMatrix),
}

impl ReadoutModel {
    pub fn symmetric(n_qubits: usize, p: f64) -> Self {
        ReadoutModel::PerQubit(vec![(p, p); n_qubits])
    }

    /// Confusion matrix seen when measuring `measured` (physical qubits, in bit order).
    pub fn confusion(&self, measured: &[usize]) -> Result<ConfusionMatrix> {
        match self {
            ReadoutModel::Ideal => Ok(ConfusionMatrix::identity(measured.len())),
            ReadoutModel::PerQubit(flips) => {
                let sel = measured
                    .iter()
                    .map(|&q| {
                        flips.get(q).copied().ok_or_else(|| {
                            Error::QubitIndex(format!("no readout rates for qubit {q}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ConfusionMatrix::from_flips(&sel)
            }
            ReadoutModel::Full(m) if m.n_bits() == measured.len() => Ok(m.clone()),
            ReadoutModel::Full(m) => Err(Error::Dimension(format!(
                "{}-bit confusion matrix for {} measured qubits",
                m.n_bits(),
                measured.len()
            ))),
        }
    }
}

/// Shot histogram. Serialized as `{shots, histogram}` where character `k` of
/// a bitstring is measured bit `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    n_bits: usize,
    counts: Vec<u64>,
}

impl Counts {
    pub fn new(n_bits: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << n_bits {
            return Err(Error::Dimension(format!(
                "{} bins for {n_bits} bits",
                counts.len()
            )));
        }
        Ok(Self { n_bits, counts })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn shots(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, outcome: usize) -> u64 {
        self.counts[outcome]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.shots().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn bitstring(&self, outcome: usize) -> String {
        (0..self.n_bits)
            .map(|k| if outcome >> k & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Sum of two histograms over the same bits.
    pub fn merge(&self, other: &Counts) -> Result<Counts> {
        if self.n_bits != other.n_bits {
            return Err(Error::Dimension("merging histograms of different width".into()));
        }
        let counts = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        Ok(Counts {
            n_bits: self.n_bits,
            counts,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsRepr {
    shots: u64,
    histogram: BTreeMap<String, u64>,
}

impl Serialize for Counts {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let histogram = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (self.bitstring(i), *c))
            .collect();
        CountsRepr {
            shots: self.shots(),
            histogram,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Counts {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CountsRepr::deserialize(d)?;
        let n_bits = repr
            .histogram
            .keys()
            .next()
            .map(String::len)
            .ok_or_else(|| D::Error::custom("empty histogram"))?;
        if n_bits > 24 {
            return Err(D::Error::custom("bitstrings longer than 24 bits"));
        }
        let mut counts = vec![0u64; 1 << n_bits];
        for (k, v) in &repr.histogram {
            if k.len() != n_bits {
                return Err(D::Error::custom(format!("bitstring {k:?} has the wrong length")));
            }
            let mut idx = 0usize;
            for (bit, ch) in k.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => idx |= 1 << bit,
                    _ => return Err(D::Error::custom(format!("bad bitstring {k:?}"))),
                }
            }
            counts[idx] += v;
        }
        let total: u64 = counts.iter().sum();
        if total != repr.shots {
            return Err(D::Error::custom(format!(
                "histogram totals {total} but shots is {}",
                repr.shots
            )));
        }
        Ok(Counts { n_bits, counts })
    }
}

/// Exact outcome distribution after rotating each listed qubit into its basis.
pub fn outcome_distribution(rho: &DensityMatrix, bases: &[(usize, Basis)]) -> Result<Vec<f64>> {
    let mut rotated = rho.clone();
    for &(q, b) in bases {
        for g in b.rotation(q) {
            let u = g.matrix().expect("rotation gates are unitary");
            rotated.apply_unitary_mut(&u, &[q])?;
        }
    }
    let measured: Vec<usize> = bases.iter().map(|(q, _)| *q).collect();
    let reduced = rotated.partial_trace(&measured)?;
    let mut p = reduced.probabilities();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut left = shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let p = p.max(0.0);
        if i + 1 == probs.len() || mass <= 0.0 {
            out[i] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability clamped to [0, 1]").sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Rotates into the requested bases, pushes the exact distribution through
/// `confusion` and draws `shots` samples.
pub fn sample_counts<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    bases: &[(usize, Basis)],
    shots: u64,
    confusion: &ConfusionMatrix,
    rng: &mut R,
) -> Result<Counts> {
    if confusion.n_bits() != bases.len() {
        return Err(Error::Dimension(format!(
            "{}-bit confusion matrix for {} measured qubits",
            confusion.n_bits(),
            bases.len()
        )));
    }
    let p = confusion.apply(&outcome_distribution(rho, bases)?);
    Counts::new(bases.len(), multinomial(&p, shots, rng))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// One preparation per bitstring, `2^m` circuits.
    #[default]
    Full,
    /// Each qubit prepared in `|0⟩` and `|1⟩` alone, `2m` circuits; the
    /// estimate is the tensor product of the 2×2 marginals.
    PerQubit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub matrix: ConfusionMatrix,
    pub circuits: usize,
}

fn prepared_counts<R: Rng + ?Sized>(
    bits: usize,
    n_bits: usize,
    truth: &ConfusionMatrix,
    shots: u64,
    rng: &mut R,
) -> Result<Counts> {
    let mut c = Circuit::new(n_bits);
    for q in (0..n_bits).filter(|q| bits >> q & 1 == 1) {
        c.push(Gate::x(q))?;
    }
    let rho = simulate(&c, &NoiseModel::noiseless(n_bits))?;
    let bases: Vec<(usize, Basis)> = (0..n_bits).map(|q| (q, Basis::Z)).collect();
    sample_counts(&rho, &bases, shots, truth, rng)
}

/// Estimates the confusion matrix by running basis-state preparations through `truth`.
pub fn calibration_confusion<R: Rng + ?Sized>(
    truth: &ConfusionMatrix,
    mode: CalibrationMode,
    shots: u64,
    rng: &mut R,
) -> Result<Calibration> {
    let m = truth.n_bits();
    match mode {
        CalibrationMode::Full => {
            let dim = 1 << m;
            let mut est = DMatrix::zeros(dim, dim);
            for b in 0..dim {
                let f = prepared_counts(b, m, truth, shots, rng)?.frequencies();
                for (i, v) in f.into_iter().enumerate() {
                    est[(i, b)] = v;
                }
            }
            Ok(Calibration {
                matrix: ConfusionMatrix::new(est)?,
                circuits: dim,
            })
        }
        CalibrationMode::PerQubit => {
            let mut factors = Vec::with_capacity(m);
            for k in 0..m {
                let mut f = DMatrix::zeros(2, 2);
                for s in 0..2 {
                    let counts = prepared_counts(s << k, m, truth, shots, rng)?;
                    let freq = counts.frequencies();
                    let one: f64 = freq
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i >> k & 1 == 1)
                        .map(|(_, v)| v)
                        .sum();
                    f[(0, s)] = 1.0 - one;
                    f[(1, s)] = one;
                }
                factors.push(f);
            }
            Ok(Calibration {
                matrix: ConfusionMatrix::from_factors(&factors)?,
                circuits: 2 * m,
            })
        }
    }
}

/// Iterative Bayesian unfolding of a measured distribution. `prior` defaults
/// to uniform; iteration stops early once the total-variation change drops
/// below [`UNFOLD_TOL`].
pub fn unfold(
    measured: &[f64],
    confusion: &ConfusionMatrix,
    iterations: usize,
    prior: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let dim = confusion.dim();
    if measured.len() != dim || prior.is_some_and(|p| p.len() != dim) {
        return Err(Error::Dimension(format!(
            "distribution length does not match {dim}x{dim} confusion matrix"
        )));
    }
    let cond = confusion.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let a = confusion.matrix();
    let total: f64 = measured.iter().sum();
    let m: Vec<f64> = measured.iter().map(|v| v / total).collect();
    let mut t: Vec<f64> = match prior {
        Some(p) => {
            let s: f64 = p.iter().sum();
            p.iter().map(|v| v / s).collect()
        }
        None => vec![1.0 / dim as f64; dim],
    };
    for _ in 0..iterations {
        let folded: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|l| a[(i, l)] * t[l]).sum())
            .collect();
        let next: Vec<f64> = (0..dim)
            .map(|j| {
                t[j] * (0..dim)
                    .filter(|&i| folded[i] > 0.0)
                    .map(|i| a[(i, j)] * m[i] / folded[i])
                    .sum::<f64>()
            })
            .collect();
        let tv = 0.5 * next.iter().zip(&t).map(|(x, y)| (x - y).abs()).sum::<f64>();
        t = next;
        if tv < UNFOLD_TOL {
            break;
        }
    }
    Ok(t)
}

pub fn unfold_counts(counts: &Counts, confusion: &ConfusionMatrix, iterations: usize) -> Result<Vec<f64>> {
    unfold(&counts.frequencies(), confusion, iterations, None)
}

/// `Σ_b p(b) Π_{k ∈ bits} (−1)^{b_k}`.
pub fn expectation_from_distribution(probs: &[f64], bits: &[usize]) -> f64 {
    let mask: usize = bits.iter().map(|k| 1usize << k).fold(0, |a, b| a | b);
    probs
        .iter()
        .enumerate()
        .map(|(b, p)| if (b & mask).count_ones() % 2 == 0 { *p } else { -*p })
        .sum()
}

/// Parity expectation over the listed measured bits.
pub fn expectation_from_counts(counts: &Counts, bits: &[usize]) -> Result<f64> {
    if let Some(k) = bits.iter().find(|&&k| k >= counts.n_bits()) {
        return Err(Error::QubitIndex(format!(
            "bit {k} not among {} measured bits",
            counts.n_bits()
        )));
    }
    Ok(expectation_from_distribution(&counts.frequencies(), bits))
}
