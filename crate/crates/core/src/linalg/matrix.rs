use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense row-major complex matrix.
///
/// Sized for operators on at most a handful of qubits; every product is the
/// naive triple loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must be non-empty".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Dimension("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Square matrix from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix literal");
            data.extend_from_slice(r);
        }
        Self {
            rows: n,
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Kronecker product `a ⊗ b`; `b` occupies the low-order index bits.
    pub fn kron(&self, other: &Self) -> Self {
        let (ra, ca) = (self.rows, self.cols);
        let (rb, cb) = (other.rows, other.cols);
        let mut out = Self::zeros(ra * rb, ca * cb);
        let oc = ca * cb;
        for i in 0..ra {
            for j in 0..ca {
                let a = self.data[i * ca + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..rb {
                    for l in 0..cb {
                        out.data[(i * rb + k) * oc + j * cb + l] = a * other.data[k * cb + l];
                    }
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `‖U†U − I‖_max ≤ tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .dagger()
                .mul_unchecked(self)
                .max_abs_diff(&Self::identity(self.rows))
                <= tol
    }

    /// Compares two operators modulo a global phase.
    pub fn approx_eq_up_to_phase(&self, other: &Self, tol: f64) -> bool {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return false;
        }
        // Align phases on the largest entry of `other`.
        let (idx, pivot) = other
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .expect("non-empty");
        if pivot.norm() < 1e-14 {
            return self.max_abs() <= tol;
        }
        let ratio = self.data[idx] / pivot;
        if (ratio.norm() - 1.0).abs() > tol {
            return false;
        }
        self.max_abs_diff(&other.scale(ratio)) <= tol
    }

    /// Left-multiplies by `u` acting on the listed qubits of a `2^n`-dimensional
    /// row space: `self ← U_embedded · self`. `qubits[j]` carries bit `j` of the
    /// local index of `u`.
    pub(crate) fn apply_left_local(&mut self, u: &ComplexMatrix, qubits: &[usize]) {
        let local = LocalIndex::new(self.rows, qubits);
        let k = local.offsets.len();
        let mut buf = vec![ZERO; k];
        let cols = self.cols;
        for base in local.bases() {
            for c in 0..cols {
                for (s, off) in local.offsets.iter().enumerate() {
                    buf[s] = self.data[(base | off) * cols + c];
                }
                for (r, off) in local.offsets.iter().enumerate() {
                    let urow = &u.data[r * k..(r + 1) * k];
                    let mut acc = ZERO;
                    for (a, b) in urow.iter().zip(&buf) {
                        acc += a * b;
                    }
                    self.data[(base | off) * cols + c] = acc;
                }
            }
        }
    }

    /// Right-multiplies by `u†` acting on the listed qubits of the column space:
    /// `self ← self · U_embedded†`.
    pub(crate) fn apply_right_local_dagger(&mut self, u: &ComplexMatrix, qubits: &[usize]) {
        let local = LocalIndex::new(self.cols, qubits);
        let k = local.offsets.len();
        let mut buf = vec![ZERO; k];
        let cols = self.cols;
        for base in local.bases() {
            for row in 0..self.rows {
                let line = &mut self.data[row * cols..(row + 1) * cols];
                for (s, off) in local.offsets.iter().enumerate() {
                    buf[s] = line[base | off];
                }
                for (r, off) in local.offsets.iter().enumerate() {
                    let urow = &u.data[r * k..(r + 1) * k];
                    let mut acc = ZERO;
                    for (a, b) in urow.iter().zip(&buf) {
                        acc += a.conj() * b;
                    }
                    line[base | off] = acc;
                }
            }
        }
    }

    /// `U_embedded · self · U_embedded†`.
    pub(crate) fn conjugate_local(&mut self, u: &ComplexMatrix, qubits: &[usize]) {
        self.apply_left_local(u, qubits);
        self.apply_right_local_dagger(u, qubits);
    }
}

/// Enumerates the sub-blocks touched by a local operator.
pub(crate) struct LocalIndex {
    dim: usize,
    mask: usize,
    pub(crate) offsets: Vec<usize>,
}

impl LocalIndex {
    pub(crate) fn new(dim: usize, qubits: &[usize]) -> Self {
        let k = 1usize << qubits.len();
        let offsets = (0..k)
            .map(|s| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| (s >> j) & 1 == 1)
                    .map(|(_, q)| 1usize << q)
                    .sum()
            })
            .collect();
        let mask = qubits.iter().map(|q| 1usize << q).sum();
        Self { dim, mask, offsets }
    }

    pub(crate) fn bases(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |i| i & self.mask == 0)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    /// Panics on shape mismatch; use [`ComplexMatrix::matmul`] for fallible products.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Embeds a local operator acting on `qubits` into the full `2^n` space.
pub fn embed(u: &ComplexMatrix, qubits: &[usize], n_qubits: usize) -> Result<ComplexMatrix> {
    check_qubits(qubits, n_qubits)?;
    if u.rows() != 1 << qubits.len() || !u.is_square() {
        return Err(Error::Dimension(format!(
            "operator of size {}x{} cannot act on {} qubits",
            u.rows(),
            u.cols(),
            qubits.len()
        )));
    }
    let mut out = ComplexMatrix::identity(1 << n_qubits);
    out.apply_left_local(u, qubits);
    Ok(out)
}

pub(crate) fn check_qubits(qubits: &[usize], n_qubits: usize) -> Result<()> {
    for (i, q) in qubits.iter().enumerate() {
        if *q >= n_qubits {
            return Err(Error::QubitIndex(format!(
                "qubit {q} out of range for {n_qubits} qubits"
            )));
        }
        if qubits[..i].contains(q) {
            return Err(Error::QubitIndex(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}
