use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64, ONE, ZERO};

/// Native gate set plus a generic single-qubit rotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    /// `diag(e^{−iθ/2}, e^{iθ/2})`.
    Rz { qubit: usize, theta: f64 },
    /// Square root of X.
    Sx { qubit: usize },
    X { qubit: usize },
    /// `[[c, −e^{iλ}s], [e^{iφ}s, e^{i(φ+λ)}c]]` with `c = cos(θ/2)`, `s = sin(θ/2)`.
    U {
        qubit: usize,
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    Cnot { control: usize, target: usize },
    Barrier(Vec<usize>),
}

impl Gate {
    pub fn rz(qubit: usize, theta: f64) -> Self {
        Gate::Rz { qubit, theta }
    }

    pub fn sx(qubit: usize) -> Self {
        Gate::Sx { qubit }
    }

    pub fn x(qubit: usize) -> Self {
        Gate::X { qubit }
    }

    pub fn u(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate::U {
            qubit,
            theta,
            phi,
            lambda,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// `e^{−iθX/2}` as a U gate.
    pub fn rx(qubit: usize, theta: f64) -> Self {
        Gate::u(qubit, theta, -FRAC_PI_2, FRAC_PI_2)
    }

    /// `e^{−iθY/2}` as a U gate.
    pub fn ry(qubit: usize, theta: f64) -> Self {
        Gate::u(qubit, theta, 0.0, 0.0)
    }

    /// Qubits touched, in local-bit order (control first for CNOT).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Rz { qubit, .. } | Gate::Sx { qubit } | Gate::X { qubit } | Gate::U { qubit, .. } => {
                vec![*qubit]
            }
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Barrier(qs) => qs.clone(),
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(
            self,
            Gate::Rz { .. } | Gate::Sx { .. } | Gate::X { .. } | Gate::U { .. }
        )
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot { .. })
    }

    pub fn is_barrier(&self) -> bool {
        matches!(self, Gate::Barrier(_))
    }

    pub fn check(&self) -> Result<()> {
        let finite = match self {
            Gate::Rz { theta, .. } => theta.is_finite(),
            Gate::U {
                theta, phi, lambda, ..
            } => theta.is_finite() && phi.is_finite() && lambda.is_finite(),
            _ => true,
        };
        if !finite {
            return Err(Error::InvalidGate(format!("non-finite angle in {self}")));
        }
        if let Gate::Cnot { control, target } = self {
            if control == target {
                return Err(Error::InvalidGate(format!("CNOT with control = target = {control}")));
            }
        }
        Ok(())
    }

    /// Local matrix; `None` for barriers.
    pub fn matrix(&self) -> Option<ComplexMatrix> {
        Some(match self {
            Gate::Rz { theta, .. } => rz_matrix(*theta),
            Gate::Sx { .. } => {
                let a = C64::new(0.5, 0.5);
                let b = C64::new(0.5, -0.5);
                ComplexMatrix::from_rows(&[&[a, b], &[b, a]])
            }
            Gate::X { .. } => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            Gate::U {
                theta, phi, lambda, ..
            } => u_matrix(*theta, *phi, *lambda),
            Gate::Cnot { .. } => cnot_matrix(),
            Gate::Barrier(_) => return None,
        })
    }

    /// Same gate acting on relabelled qubits.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::Rz { qubit, theta } => Gate::rz(f(*qubit), *theta),
            Gate::Sx { qubit } => Gate::sx(f(*qubit)),
            Gate::X { qubit } => Gate::x(f(*qubit)),
            Gate::U {
                qubit,
                theta,
                phi,
                lambda,
            } => Gate::u(f(*qubit), *theta, *phi, *lambda),
            Gate::Cnot { control, target } => Gate::cnot(f(*control), f(*target)),
            Gate::Barrier(qs) => Gate::Barrier(qs.iter().map(|q| f(*q)).collect()),
        }
    }

    /// Inverse gate, exact except for SX whose inverse carries a global phase.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Rz { qubit, theta } => Gate::rz(*qubit, -theta),
            Gate::Sx { qubit } => Gate::rx(*qubit, -FRAC_PI_2),
            Gate::U {
                qubit,
                theta,
                phi,
                lambda,
            } => Gate::u(*qubit, -theta, -lambda, -phi),
            g => g.clone(),
        }
    }
}

pub fn rz_matrix(theta: f64) -> ComplexMatrix {
    ComplexMatrix::diagonal(&[
        C64::from_polar(1.0, -theta / 2.0),
        C64::from_polar(1.0, theta / 2.0),
    ])
}

pub fn u_matrix(theta: f64, phi: f64, lambda: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_rows(&[
        &[C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        &[C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ])
}

/// CNOT with the control on local bit 0.
pub fn cnot_matrix() -> ComplexMatrix {
    let (o, l) = (ZERO, ONE);
    ComplexMatrix::from_rows(&[&[l, o, o, o], &[o, o, o, l], &[o, o, l, o], &[o, l, o, o]])
}

pub fn swap_matrix() -> ComplexMatrix {
    let (o, l) = (ZERO, ONE);
    ComplexMatrix::from_rows(&[&[l, o, o, o], &[o, o, l, o], &[o, l, o, o], &[o, o, o, l]])
}

/// `[CNOT(a,b), CNOT(b,a), CNOT(a,b)]`.
pub fn decompose_swap(a: usize, b: usize) -> Result<Vec<Gate>> {
    if a == b {
        return Err(Error::InvalidGate(format!("SWAP of qubit {a} with itself")));
    }
    Ok(vec![Gate::cnot(a, b), Gate::cnot(b, a), Gate::cnot(a, b)])
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Rz { qubit, theta } => write!(f, "RZ q{qubit} {theta}"),
            Gate::Sx { qubit } => write!(f, "SX q{qubit}"),
            Gate::X { qubit } => write!(f, "X q{qubit}"),
            Gate::U {
                qubit,
                theta,
                phi,
                lambda,
            } => write!(f, "U q{qubit} {theta} {phi} {lambda}"),
            Gate::Cnot { control, target } => write!(f, "CNOT q{control} q{target}"),
            Gate::Barrier(qs) => {
                f.write_str("BARRIER")?;
                for q in qs {
                    write!(f, " q{q}")?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::I;
    use crate::linalg::pauli::Pauli;
    use std::f64::consts::PI;

    #[test]
    fn paulis_as_u_gates() {
        let cases = [
            (Pauli::I, (0.0, 0.0, 0.0)),
            (Pauli::X, (PI, 0.0, PI)),
            (Pauli::Y, (PI, PI / 2.0, PI / 2.0)),
            (Pauli::Z, (0.0, 0.0, PI)),
        ];
        for (p, (t, ph, l)) in cases {
            assert!(u_matrix(t, ph, l).max_abs_diff(&p.matrix()) < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn sx_squares_to_x() {
        let sx = Gate::sx(0).matrix().unwrap();
        assert!((&sx * &sx).max_abs_diff(&Pauli::X.matrix()) < 1e-15);
    }

    #[test]
    fn inverses() {
        let gates = [Gate::rz(0, 0.7), Gate::sx(0), Gate::x(0), Gate::u(0, 0.3, -1.1, 2.4)];
        for g in gates {
            let m = g.matrix().unwrap();
            let inv = g.inverse().matrix().unwrap();
            assert!((&inv * &m).approx_eq_up_to_phase(&ComplexMatrix::identity(2), 1e-14), "{g}");
        }
    }

    #[test]
    fn rx_is_exponential() {
        let theta = 0.83;
        let expected = crate::linalg::hermitian_evolve(&Pauli::X.matrix(), theta / 2.0).unwrap();
        assert!(Gate::rx(0, theta).matrix().unwrap().max_abs_diff(&expected) < 1e-14);
        let expected = crate::linalg::hermitian_evolve(&Pauli::Y.matrix(), theta / 2.0).unwrap();
        assert!(Gate::ry(0, theta).matrix().unwrap().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn rz_values() {
        let m = rz_matrix(PI);
        assert!(m.max_abs_diff(&ComplexMatrix::diagonal(&[-I, I])) < 1e-15);
    }

    #[test]
    fn swap_from_three_cnots() {
        use crate::linalg::matrix::embed;
        let gates = decompose_swap(0, 1).unwrap();
        let mut u = ComplexMatrix::identity(4);
        for g in &gates {
            u = &embed(&g.matrix().unwrap(), &g.qubits(), 2).unwrap() * &u;
        }
        assert!(u.max_abs_diff(&swap_matrix()) < 1e-12);
        assert!(decompose_swap(1, 1).is_err());
    }

    #[test]
    fn check_rejects_bad_gates() {
        assert!(Gate::cnot(1, 1).check().is_err());
        assert!(Gate::rz(0, f64::NAN).check().is_err());
        assert!(Gate::cnot(0, 1).check().is_ok());
    }
}
