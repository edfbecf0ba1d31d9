//! Reduced BCS pairing model in the spin representation.
//!
//! `H = −Σ_j (ε_j − g/2) Z_j − (g/2) Σ_{i<j} (X_i X_j + Y_i Y_j)`, one qubit per
//! pair level, `|1⟩` meaning the level holds a Cooper pair.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{decompose_swap, Circuit, CouplingMap, Gate, LayoutTracker, MAX_UNITARY_QUBITS};
use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64};
use crate::linalg::{hermitian_evolve, DensityMatrix, Pauli, PauliString};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcsParams {
    pub levels: Vec<f64>,
    pub g: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl BcsParams {
    pub fn new(levels: Vec<f64>, g: f64, dt: f64, n_steps: usize) -> Result<Self> {
        let p = Self {
            levels,
            g,
            dt,
            n_steps,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Error::Config {
            path: "bcs".into(),
            msg: msg.into(),
        };
        if self.levels.len() < 2 {
            return Err(bad("at least two levels are required"));
        }
        if self.levels.iter().any(|e| !e.is_finite()) || !self.g.is_finite() {
            return Err(bad("levels and g must be finite"));
        }
        if self.g < 0.0 {
            return Err(bad("g must be non-negative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt must be positive"));
        }
        Ok(())
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Evolution times `k·dt` for `k = 0..=n_steps`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }
}

/// Product state `Π (u_i|0⟩ + v_i|1⟩)` from the mean-field solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub delta: f64,
    pub thetas: Vec<f64>,
    pub phi: f64,
}

impl MeanFieldState {
    /// Amplitudes `(u_i, v_i)` with `u = cos(θ/2)e^{iφ/2}`, `v = sin(θ/2)e^{−iφ/2}`.
    pub fn amplitudes(&self) -> Vec<(C64, C64)> {
        self.thetas
            .iter()
            .map(|t| {
                (
                    C64::from_polar((t / 2.0).cos(), self.phi / 2.0),
                    C64::from_polar((t / 2.0).sin(), -self.phi / 2.0),
                )
            })
            .collect()
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let amps = self.amplitudes();
        let n = amps.len();
        let psi: Vec<C64> = (0..1usize << n)
            .map(|b| {
                amps.iter()
                    .enumerate()
                    .map(|(q, (u, v))| if (b >> q) & 1 == 1 { *v } else { *u })
                    .product()
            })
            .collect();
        DensityMatrix::from_pure(&psi).expect("normalized product state")
    }
}

pub fn build_hamiltonian(p: &BcsParams) -> Result<ComplexMatrix> {
    let n = p.n_levels();
    if n > MAX_UNITARY_QUBITS {
        return Err(Error::CircuitTooLarge(n, MAX_UNITARY_QUBITS));
    }
    let dim = 1 << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    let mut add = |terms: &[(usize, Pauli)], coeff: f64| {
        let m = PauliString::from_sparse(n, terms).to_matrix();
        h = &h + &m.scale(C64::new(coeff, 0.0));
    };
    for (j, e) in p.levels.iter().enumerate() {
        add(&[(j, Pauli::Z)], -(e - p.g / 2.0));
    }
    for i in 0..n {
        for j in i + 1..n {
            add(&[(i, Pauli::X), (j, Pauli::X)], -p.g / 2.0);
            add(&[(i, Pauli::Y), (j, Pauli::Y)], -p.g / 2.0);
        }
    }
    Ok(h)
}

fn gap_rhs(levels: &[f64], g: f64, delta: f64) -> f64 {
    g * levels
        .iter()
        .map(|e| 0.5 / (e * e + delta * delta).sqrt())
        .sum::<f64>()
}

/// Positive root of `1 = g Σ 1/(2√(ε_j² + Δ²))` by bracketing and bisection.
pub fn solve_gap(levels: &[f64], g: f64) -> Result<f64> {
    if levels.is_empty() || !(g > 0.0) {
        return Err(Error::NoGapSolution(format!(
            "need g > 0 and at least one level (g = {g})"
        )));
    }
    let f = |d: f64| gap_rhs(levels, g, d) - 1.0;
    let mut lo = 1e-12;
    if f(lo) <= 0.0 {
        return Err(Error::NoGapSolution(format!(
            "coupling g = {g} is below the pairing threshold for levels {levels:?}"
        )));
    }
    let mut hi = g * levels.len() as f64;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let delta = 0.5 * (lo + hi);
    let residual = f(delta).abs();
    if residual > 1e-10 {
        return Err(Error::NoGapSolution(format!("bisection stalled at residual {residual:e}")));
    }
    Ok(delta)
}

/// Angles for a real positive gap `delta`.
pub fn mean_field_angles(p: &BcsParams, delta: f64) -> MeanFieldState {
    mean_field_angles_complex(p, C64::new(delta, 0.0))
}

/// `θ_i = 2 atan((√(ε_i² + |Δ|²) − ε_i)/|Δ|)`, `φ = −arg Δ`.
pub fn mean_field_angles_complex(p: &BcsParams, delta: C64) -> MeanFieldState {
    let d = delta.norm();
    let thetas = p
        .levels
        .iter()
        .map(|e| 2.0 * (((e * e + d * d).sqrt() - e) / d).atan())
        .collect();
    MeanFieldState {
        delta: d,
        thetas,
        phi: -delta.arg(),
    }
}

/// `R_y(θ_i)` then a Z rotation on every qubit.
///
/// The Z rotation is `RZ(−φ)`: with `u = cos(θ/2)e^{iφ/2}` and
/// `v = sin(θ/2)e^{−iφ/2}` the relative phase `v/u` is `e^{−iφ}`, which is
/// what `RZ(−φ)` imprints on `R_y(θ)|0⟩`.
pub fn prep_circuit(mf: &MeanFieldState) -> Circuit {
    let n = mf.thetas.len();
    let mut c = Circuit::new(n);
    for (q, t) in mf.thetas.iter().enumerate() {
        c.push(Gate::ry(q, *t)).expect("qubit in range");
        if mf.phi != 0.0 {
            c.push(Gate::rz(q, -mf.phi)).expect("qubit in range");
        }
    }
    c
}

/// How each `e^{−i(α/2)(XX+YY)}` block is compiled.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionForm {
    /// One CNOT–RZ–CNOT ladder per Pauli direction.
    FourCnot,
    /// Basis change mapping YY to ZZ, then a single CNOT pair.
    #[default]
    TwoCnot,
}

fn o_x(q: usize) -> Gate {
    Gate::u(q, FRAC_PI_2, 0.0, std::f64::consts::PI)
}

fn o_y(q: usize) -> Gate {
    Gate::u(q, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2)
}

/// Gates for `e^{−i(α/2)(X_aX_b + Y_aY_b)}`; `a` is the CNOT control.
pub fn interaction_gates(alpha: f64, a: usize, b: usize, form: InteractionForm) -> Vec<Gate> {
    match form {
        InteractionForm::FourCnot => {
            let mut gates = Vec::with_capacity(14);
            for o in [o_x as fn(usize) -> Gate, o_y] {
                gates.extend([o(a), o(b), Gate::cnot(a, b), Gate::rz(b, alpha), Gate::cnot(a, b)]);
                gates.extend([o(a).inverse(), o(b).inverse()]);
            }
            gates
        }
        InteractionForm::TwoCnot => vec![
            Gate::rx(a, FRAC_PI_2),
            Gate::rx(b, FRAC_PI_2),
            Gate::cnot(a, b),
            Gate::rx(a, alpha),
            Gate::rz(b, alpha),
            Gate::cnot(a, b),
            Gate::rx(a, -FRAC_PI_2),
            Gate::rx(b, -FRAC_PI_2),
        ],
    }
}

/// Standalone interaction block on `n_qubits`, checked against the coupling map.
pub fn interaction_block(
    alpha: f64,
    a: usize,
    b: usize,
    map: &CouplingMap,
    form: InteractionForm,
) -> Result<Circuit> {
    if !map.contains(a, b) {
        return Err(Error::NotAdjacent(a, b));
    }
    Circuit::from_gates(map.n_qubits(), interaction_gates(alpha, a, b, form))
}

/// One first-order Trotter step on a linear chain.
///
/// Single-qubit Z rotations come first, then every pair of logical qubits
/// that is currently adjacent, then SWAPs (each followed by the pairs it made
/// adjacent) until all pairs are done. The returned layout is the one in force
/// after the step, so consecutive steps do not undo each other's SWAPs.
pub fn trotter_step(
    p: &BcsParams,
    layout: &LayoutTracker,
    form: InteractionForm,
) -> (Circuit, LayoutTracker) {
    trotter_step_dt(p, p.dt, layout, form)
}

pub(crate) fn trotter_step_dt(
    p: &BcsParams,
    dt: f64,
    layout: &LayoutTracker,
    form: InteractionForm,
) -> (Circuit, LayoutTracker) {
    let n = p.n_levels();
    let mut c = Circuit::new(n);
    let mut layout = layout.clone();
    for (j, e) in p.levels.iter().enumerate() {
        c.push(Gate::rz(layout.physical(j), -dt * (2.0 * e - p.g)))
            .expect("qubit in range");
    }
    if p.g == 0.0 {
        return (c, layout);
    }
    let alpha = -p.g * dt;
    let mut remaining: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let adjacent = |l: &LayoutTracker, (i, j): (usize, usize)| l.physical(i).abs_diff(l.physical(j)) == 1;
    loop {
        let mut rest = Vec::new();
        for pair in remaining {
            if adjacent(&layout, pair) {
                let (a, b) = (layout.physical(pair.0), layout.physical(pair.1));
                c.extend(interaction_gates(alpha, a, b, form)).expect("qubits in range");
            } else {
                rest.push(pair);
            }
        }
        remaining = rest;
        if remaining.is_empty() {
            break;
        }
        let gain = |s: usize| {
            let mut l = layout.clone();
            l.swap_physical(s, s + 1);
            remaining.iter().filter(|pair| adjacent(&l, **pair)).count()
        };
        let best = (0..n - 1).max_by_key(|&s| (gain(s), std::cmp::Reverse(s))).expect("n ≥ 2");
        let s = if gain(best) > 0 {
            best
        } else {
            let (pa, pb) = (layout.physical(remaining[0].0), layout.physical(remaining[0].1));
            if pa < pb {
                pa
            } else {
                pa - 1
            }
        };
        c.extend(decompose_swap(s, s + 1).expect("distinct qubits"))
            .expect("qubits in range");
        layout.swap_physical(s, s + 1);
    }
    (c, layout)
}

/// State preparation followed by `k` Trotter steps, with the final layout.
pub fn trotter_circuit(
    p: &BcsParams,
    mf: &MeanFieldState,
    k: usize,
    form: InteractionForm,
) -> (Circuit, LayoutTracker) {
    let mut c = prep_circuit(mf);
    let mut layout = LayoutTracker::identity(p.n_levels());
    for _ in 0..k {
        let (step, next) = trotter_step(p, &layout, form);
        c.append(&step).expect("same width");
        layout = next;
    }
    (c, layout)
}

/// Relabels a logical observable onto physical qubits.
pub fn to_physical(obs: &PauliString, layout: &LayoutTracker) -> PauliString {
    let n = obs.n_qubits();
    let terms: Vec<(usize, Pauli)> = obs
        .factors()
        .iter()
        .enumerate()
        .map(|(l, f)| (layout.physical(l), *f))
        .collect();
    PauliString::from_sparse(n, &terms).with_phase(obs.phase())
}

/// `ρ(t) = e^{−iHt} ρ₀ e^{iHt}` for each requested time, in logical qubit order.
pub fn exact_evolution(p: &BcsParams, mf: &MeanFieldState, times: &[f64]) -> Result<Vec<DensityMatrix>> {
    let h = build_hamiltonian(p)?;
    let rho0 = mf.density_matrix();
    let all: Vec<usize> = (0..p.n_levels()).collect();
    times
        .par_iter()
        .map(|&t| {
            let u = hermitian_evolve(&h, t)?;
            rho0.apply_unitary(&u, &all)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::permutation_unitary;

    fn paper() -> BcsParams {
        BcsParams::new(vec![-1.0, 0.0, 1.0], 0.5, 0.2, 15).unwrap()
    }

    fn pauli_exp(n: usize, terms: &[(usize, Pauli)], angle: f64) -> ComplexMatrix {
        hermitian_evolve(&PauliString::from_sparse(n, terms).to_matrix(), angle).unwrap()
    }

    #[test]
    fn gap_values() {
        let d = solve_gap(&paper().levels, 0.5).unwrap();
        assert!((d - 0.46).abs() < 0.01, "{d}");
        assert!((gap_rhs(&paper().levels, 0.5, d) - 1.0).abs() < 1e-10);
        let single = solve_gap(&[0.0], 0.8).unwrap();
        assert!((single - 0.4).abs() < 1e-12);
        assert!(solve_gap(&paper().levels, 1.0).unwrap() > d);
        assert!(matches!(solve_gap(&[-1.0, 1.0], 0.1), Err(Error::NoGapSolution(_))));
    }

    #[test]
    fn angle_limits() {
        let p = BcsParams::new(vec![0.0, 1e9], 0.5, 0.1, 1).unwrap();
        let mf = mean_field_angles(&p, 0.3);
        assert!((mf.thetas[0] - FRAC_PI_2).abs() < 1e-14);
        assert!(mf.thetas[1] < 1e-8);
        assert_eq!(mf.phi, 0.0);
    }

    #[test]
    fn prep_matches_mean_field_state() {
        let p = paper();
        let mf = mean_field_angles_complex(&p, C64::from_polar(0.46, 0.7));
        let prep = prep_circuit(&mf);
        let rho = DensityMatrix::zero_state(3)
            .apply_unitary(&prep.unitary().unwrap(), &[0, 1, 2])
            .unwrap();
        assert!(rho.matrix().max_abs_diff(mf.density_matrix().matrix()) < 1e-12);
    }

    #[test]
    fn prep_z_is_cos_theta() {
        let p = paper();
        let d = solve_gap(&p.levels, p.g).unwrap();
        let mf = mean_field_angles(&p, d);
        let rho = mf.density_matrix();
        for (q, e) in p.levels.iter().enumerate() {
            let z = rho.expectation(&PauliString::from_sparse(3, &[(q, Pauli::Z)])).unwrap();
            assert!((z - e / (e * e + d * d).sqrt()).abs() < 1e-12);
        }
        let x0 = rho.expectation(&"XII".parse().unwrap()).unwrap();
        let z2 = rho.expectation(&"IIZ".parse().unwrap()).unwrap();
        let x0z2 = rho.expectation(&"XIZ".parse().unwrap()).unwrap();
        assert!((x0z2 - x0 * z2).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_conserves_pair_number() {
        let p = BcsParams::new(vec![0.0, 0.0], 0.7, 0.1, 1).unwrap();
        let h = build_hamiltonian(&p).unwrap();
        let total_z = &PauliString::from_sparse(2, &[(0, Pauli::Z)]).to_matrix()
            + &PauliString::from_sparse(2, &[(1, Pauli::Z)]).to_matrix();
        assert!(h.commutator(&total_z).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn free_hamiltonian_is_diagonal() {
        let p = BcsParams::new(vec![-1.0, 2.0], 0.0, 0.1, 1).unwrap();
        let h = build_hamiltonian(&p).unwrap();
        let diag = [1.0 - 2.0, -1.0 - 2.0, 1.0 + 2.0, -1.0 + 2.0];
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { diag[r] } else { 0.0 };
                assert!((h[(r, c)] - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn interaction_forms_match_exponential() {
        let map = CouplingMap::linear(2);
        for alpha in [0.0, 0.37, -1.3, std::f64::consts::PI] {
            let xx = pauli_exp(2, &[(0, Pauli::X), (1, Pauli::X)], alpha / 2.0);
            let yy = pauli_exp(2, &[(0, Pauli::Y), (1, Pauli::Y)], alpha / 2.0);
            let want = &xx * &yy;
            for form in [InteractionForm::FourCnot, InteractionForm::TwoCnot] {
                let c = interaction_block(alpha, 0, 1, &map, form).unwrap();
                assert!(c.unitary().unwrap().max_abs_diff(&want) < 1e-10, "{form:?} α={alpha}");
            }
        }
        let c = interaction_block(0.3, 0, 1, &map, InteractionForm::TwoCnot).unwrap();
        assert_eq!(c.count_cnots(), 2);
        assert!(interaction_block(0.3, 0, 2, &CouplingMap::linear(3), InteractionForm::TwoCnot).is_err());
    }

    #[test]
    fn hopping_population_transfer() {
        // On span{|01⟩, |10⟩}, XX + YY = 2σ^x, so the block is e^{−iασ^x}:
        // complete transfer at α = π/2, back to the start at α = π.
        let map = CouplingMap::linear(2);
        let population = |alpha: f64| {
            let c = interaction_block(alpha, 0, 1, &map, InteractionForm::TwoCnot).unwrap();
            let out = DensityMatrix::basis_state(2, 0b01)
                .apply_unitary(&c.unitary().unwrap(), &[0, 1])
                .unwrap();
            out.matrix()[(0b10, 0b10)].re
        };
        assert!((population(FRAC_PI_2) - 1.0).abs() < 1e-12);
        assert!(population(std::f64::consts::PI).abs() < 1e-12);
        assert!((population(0.4) - 0.4f64.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn three_level_step_has_nine_cnots() {
        let p = paper();
        let (step, layout) = trotter_step(&p, &LayoutTracker::identity(3), InteractionForm::TwoCnot);
        assert_eq!(step.count_cnots(), 9);
        assert!(step.validate(&CouplingMap::linear(3)).is_empty());
        assert_eq!(layout.permutation(), &[1, 0, 2]);
        let mf = mean_field_angles(&p, 0.46);
        let (full, _) = trotter_circuit(&p, &mf, 15, InteractionForm::TwoCnot);
        assert_eq!(full.count_cnots(), 135);
    }

    #[test]
    fn step_equals_trotter_product_times_permutation() {
        let p = paper();
        let n = 3;
        let (step, layout) = trotter_step(&p, &LayoutTracker::identity(n), InteractionForm::TwoCnot);
        let mut want = ComplexMatrix::identity(8);
        for (j, e) in p.levels.iter().enumerate() {
            want = &pauli_exp(n, &[(j, Pauli::Z)], -(e - p.g / 2.0) * p.dt) * &want;
        }
        // Adjacent pairs first, the distant pair after the SWAP.
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let angle = -p.g / 2.0 * p.dt;
            want = &pauli_exp(n, &[(i, Pauli::X), (j, Pauli::X)], angle) * &want;
            want = &pauli_exp(n, &[(i, Pauli::Y), (j, Pauli::Y)], angle) * &want;
        }
        let want = &permutation_unitary(&layout) * &want;
        assert!(step.unitary().unwrap().approx_eq_up_to_phase(&want, 1e-10));
    }

    #[test]
    fn backward_step_undoes_forward_step() {
        let p = paper();
        let start = LayoutTracker::from_permutation(vec![2, 0, 1]).unwrap();
        let (fwd, _) = trotter_step_dt(&p, p.dt, &start, InteractionForm::FourCnot);
        let (bwd, _) = trotter_step_dt(&p, -p.dt, &start, InteractionForm::FourCnot);
        // In the four-CNOT form every angle-carrying gate is an RZ and every U
        // gate is a fixed basis change, so running the −Δt step backwards with
        // the basis changes inverted must undo the forward step.
        let mut undo = Circuit::new(3);
        for g in bwd.gates().iter().rev() {
            let g = match g {
                Gate::U { .. } => g.inverse(),
                _ => g.clone(),
            };
            undo.push(g).unwrap();
        }
        let mut both = fwd.clone();
        both.append(&undo).unwrap();
        assert!(both
            .unitary()
            .unwrap()
            .approx_eq_up_to_phase(&ComplexMatrix::identity(8), 1e-10));
    }

    #[test]
    fn general_chain_routes_all_pairs() {
        for n in 2..=6 {
            let p = BcsParams::new((0..n).map(|x| x as f64 * 0.3).collect(), 0.4, 0.1, 1).unwrap();
            let (step, layout) = trotter_step(&p, &LayoutTracker::identity(n), InteractionForm::TwoCnot);
            assert!(step.validate(&CouplingMap::linear(n)).is_empty());
            let pairs = n * (n - 1) / 2;
            assert_eq!((step.count_cnots() - 2 * pairs) % 3, 0);
            let skel = step.strip_single_qubit_gates();
            if n <= 4 {
                assert_eq!(skel.cnot_permutation().unwrap(), layout);
            }
        }
    }

    #[test]
    fn zero_coupling_has_no_cnots() {
        let p = BcsParams::new(vec![-1.0, 0.0, 1.0], 0.0, 0.2, 1).unwrap();
        let (step, _) = trotter_step(&p, &LayoutTracker::identity(3), InteractionForm::TwoCnot);
        assert_eq!(step.count_cnots(), 0);
    }

    #[test]
    fn exact_evolution_conserves_energy_and_number() {
        let p = paper();
        let mf = mean_field_angles(&p, solve_gap(&p.levels, p.g).unwrap());
        let h = build_hamiltonian(&p).unwrap();
        let rhos = exact_evolution(&p, &mf, &p.times()).unwrap();
        let energy = |r: &DensityMatrix| (r.matrix() * &h).trace().re;
        let number = |r: &DensityMatrix| {
            (0..3)
                .map(|q| r.expectation(&PauliString::from_sparse(3, &[(q, Pauli::Z)])).unwrap())
                .sum::<f64>()
        };
        for r in &rhos {
            assert!((energy(r) - energy(&rhos[0])).abs() < 1e-9);
            assert!((number(r) - number(&rhos[0])).abs() < 1e-9);
        }
        assert!(rhos[0].matrix().max_abs_diff(mf.density_matrix().matrix()) < 1e-12);
    }
}
