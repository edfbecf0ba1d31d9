//! Noise-estimation circuits, ratio mitigation, first-order noise predictors
//! and finite-sampling error bars.

use std::f64::consts::PI;
use std::path::Path;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Basis, Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, PauliString};
use crate::rc::NeighborMap;
use crate::sim::{simulate_from, NoiseModel};

/// Below this `|⟨E⟩|` a mitigated value is reported but flagged unreliable.
pub const DENOMINATOR_FLOOR: f64 = 1e-3;

/// Haar-random single-qubit unitary as a U gate.
pub fn haar_u_gate<R: Rng + ?Sized>(qubit: usize, rng: &mut R) -> Gate {
    let u: f64 = rng.random();
    let theta = 2.0 * u.sqrt().acos();
    let phi = 2.0 * PI * rng.random::<f64>();
    let lambda = 2.0 * PI * rng.random::<f64>();
    Gate::u(qubit, theta, phi, lambda)
}

/// Strips single-qubit gates, prepends a Haar-random product preparation and
/// appends its inverse on the positions the CNOT skeleton carries each qubit
/// to. Every measured qubit is read in Z, so the noiseless NEC gives +1 for
/// every Z-type observable.
pub fn build_nec<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<Circuit> {
    let skeleton = c.strip_single_qubit_gates();
    let perm = skeleton
        .cnot_permutation()
        .ok_or_else(|| Error::NotNec("CNOT skeleton is not a qubit permutation".into()))?;
    let n = c.n_qubits();
    let mut out = Circuit::new(n);
    let prep: Vec<Gate> = (0..n).map(|q| haar_u_gate(q, rng)).collect();
    out.extend(prep.iter().cloned())?;
    out.extend(skeleton.gates().iter().cloned())?;
    for (q, g) in prep.iter().enumerate() {
        out.push(g.inverse().remap(&|_| perm.physical(q)))?;
    }
    for q in c.measured_qubits() {
        out.measure(q, Basis::Z)?;
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mitigated {
    pub value: f64,
    pub reliable: bool,
}

/// `⟨O⟩_noisy / ⟨E⟩_noisy`, flagged unreliable when `|⟨E⟩| < DENOMINATOR_FLOOR`.
pub fn mitigate(o_noisy: f64, e_noisy: f64) -> Mitigated {
    Mitigated {
        value: o_noisy / e_noisy,
        reliable: e_noisy.abs() >= DENOMINATOR_FLOOR,
    }
}

/// `σ_m² = (⟨O⟩²σ_e² + ⟨E⟩²σ_o²) / ⟨E⟩⁴`.
pub fn mitigation_uncertainty(o_noisy: f64, e_noisy: f64, sigma_o: f64, sigma_e: f64) -> f64 {
    let e2 = e_noisy * e_noisy;
    ((o_noisy * o_noisy * sigma_e * sigma_e + e2 * sigma_o * sigma_o) / (e2 * e2)).sqrt()
}

/// Same quantity written through the mitigated value:
/// `σ_m² = (⟨O⟩_m² σ_e² + σ_o²) / ⟨E⟩²`.
pub fn mitigation_uncertainty_from_ratio(o_noisy: f64, e_noisy: f64, sigma_o: f64, sigma_e: f64) -> f64 {
    let m = o_noisy / e_noisy;
    ((m * m * sigma_e * sigma_e + sigma_o * sigma_o) / (e_noisy * e_noisy)).sqrt()
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: f64,
    pub sigma: f64,
    pub shot_term: f64,
    pub twirl_term: f64,
}

/// Mean over twirl configurations and
/// `σ² = Σ_r (1 − O_r²) / (N_s N_t²) + Var(O_r) / N_t`, with the sample
/// variance taken over configurations (`N_t − 1` denominator).
pub fn ensemble_statistics(values: &[f64], shots: u64) -> Result<EnsembleStats> {
    let nt = values.len();
    if nt < 2 {
        return Err(Error::Config {
            path: "rc.count".into(),
            msg: "at least two twirl configurations are needed for error bars".into(),
        });
    }
    let ntf = nt as f64;
    let mean = values.iter().sum::<f64>() / ntf;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ntf - 1.0);
    let shot_term = if shots == 0 {
        0.0
    } else {
        values.iter().map(|v| 1.0 - v * v).sum::<f64>() / (shots as f64 * ntf * ntf)
    };
    let twirl_term = var / ntf;
    Ok(EnsembleStats {
        mean,
        sigma: (shot_term + twirl_term).sqrt(),
        shot_term,
        twirl_term,
    })
}

/// `⟨O⟩₀`, `⟨O⟩₁` and `⟨O'⟩₁`: the noiseless value and the sums over single
/// CNOTs whose output is replaced by the maximally mixed state on the active
/// pair (resp. on the junction's neighbours).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneErrorSums {
    pub o0: f64,
    pub o1: f64,
    pub o1_neighbor: f64,
    pub n_cnot: usize,
}

/// Brute-force one-error enumeration for a Pauli observable on physical qubits.
pub fn one_error_sums(c: &Circuit, neighbors: &NeighborMap, obs: &PauliString) -> Result<OneErrorSums> {
    let n = c.n_qubits();
    let ideal = NoiseModel::noiseless(n);
    let gates = c.gates();
    let tail = |start: usize, rho: &mut DensityMatrix| -> Result<()> {
        let rest = Circuit::from_gates(n, gates[start..].iter().cloned())?;
        simulate_from(rho, &rest, &ideal)
    };
    let mut rho = DensityMatrix::zero_state(n);
    let (mut o1, mut o1n, mut n_cnot) = (0.0, 0.0, 0);
    for (k, g) in gates.iter().enumerate() {
        let one = Circuit::from_gates(n, [g.clone()])?;
        simulate_from(&mut rho, &one, &ideal)?;
        if let Gate::Cnot { control, target } = *g {
            n_cnot += 1;
            let mut a = rho.clone();
            a.depolarize_mut(&[control, target], 1.0)?;
            tail(k + 1, &mut a)?;
            o1 += a.expectation(obs)?;
            let mut b = rho.clone();
            b.depolarize_mut(neighbors.neighbors(control, target), 1.0)?;
            tail(k + 1, &mut b)?;
            o1n += b.expectation(obs)?;
        }
    }
    Ok(OneErrorSums {
        o0: rho.expectation(obs)?,
        o1,
        o1_neighbor: o1n,
        n_cnot,
    })
}

/// First-order expansion in the number of errors:
/// `(1−λ_glob)^n [⟨O⟩₀(1 − n(λ_cnot+λ_neigh)) + λ_cnot⟨O⟩₁ + λ_neigh⟨O'⟩₁]`.
pub fn first_order_prediction(sums: &OneErrorSums, lambda_cnot: f64, lambda_neigh: f64, lambda_glob: f64) -> f64 {
    if lambda_cnot.max(lambda_neigh).max(lambda_glob) > 0.05 {
        warn!("first-order prediction used outside the small-rate regime");
    }
    let nf = sums.n_cnot as f64;
    (1.0 - lambda_glob).powi(sums.n_cnot as i32)
        * (sums.o0 * (1.0 - nf * (lambda_cnot + lambda_neigh))
            + lambda_cnot * sums.o1
            + lambda_neigh * sums.o1_neighbor)
}

/// Symplectic Pauli label: bit `q` of `x`/`z` marks an X/Z factor on qubit `q`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct Frame {
    x: u64,
    z: u64,
}

impl Frame {
    fn support(self) -> u64 {
        self.x | self.z
    }

    fn through_cnot(self, c: usize, t: usize) -> Frame {
        let (mut x, mut z) = (self.x, self.z);
        x ^= ((x >> c) & 1) << t;
        z ^= ((z >> t) & 1) << c;
        Frame { x, z }
    }
}

/// Predicted `⟨E⟩_noisy` of an NEC under local two-qubit depolarizing noise
/// `eps(control, target)` after each CNOT: the product of `(1 − ε)` over every
/// CNOT that touches the (layout-tracked) support of the measured observable.
/// Errors with [`Error::NotNec`] if the skeleton is not a permutation or the
/// count depends on which Pauli sits on the measured qubits.
pub fn nec_prefactor(c: &Circuit, eps: impl Fn(usize, usize) -> f64, measured: &[usize]) -> Result<f64> {
    let skeleton = c.strip_single_qubit_gates();
    skeleton
        .cnot_permutation()
        .ok_or_else(|| Error::NotNec("CNOT skeleton is not a qubit permutation".into()))?;
    if c.n_qubits() > 32 {
        return Err(Error::CircuitTooLarge(c.n_qubits(), 32));
    }
    let cnots: Vec<(usize, usize)> = skeleton
        .gates()
        .iter()
        .filter_map(|g| match *g {
            Gate::Cnot { control, target } => Some((control, target)),
            _ => None,
        })
        .collect();
    let mut pattern: Option<Vec<bool>> = None;
    // Every choice of X/Y/Z on each measured qubit.
    for choice in 0..3usize.pow(measured.len() as u32) {
        let mut f = Frame { x: 0, z: 0 };
        let mut rem = choice;
        for &q in measured {
            match rem % 3 {
                0 => f.x |= 1 << q,
                1 => {
                    f.x |= 1 << q;
                    f.z |= 1 << q
                }
                _ => f.z |= 1 << q,
            }
            rem /= 3;
        }
        let mut hits = vec![false; cnots.len()];
        for (k, &(ctl, tgt)) in cnots.iter().enumerate().rev() {
            hits[k] = f.support() & ((1 << ctl) | (1 << tgt)) != 0;
            f = f.through_cnot(ctl, tgt);
        }
        match &pattern {
            None => pattern = Some(hits),
            Some(p) if *p == hits => {}
            Some(_) => {
                return Err(Error::NotNec(
                    "noise count depends on the Pauli on the measured qubits".into(),
                ))
            }
        }
    }
    let hits = pattern.unwrap_or_default();
    Ok(cnots
        .iter()
        .zip(hits)
        .filter(|(_, h)| *h)
        .map(|(&(ctl, tgt), _)| 1.0 - eps(ctl, tgt))
        .product())
}

/// One time step of one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: f64,
    pub observable: String,
    pub raw: f64,
    pub rc_mean: f64,
    pub rc_stderr: f64,
    pub nec_mean: f64,
    pub nec_stderr: f64,
    pub mitigated: f64,
    pub mitigated_err: f64,
    pub trotter_ideal: f64,
    pub exact: f64,
    pub reliable_flag: bool,
}

impl SeriesRow {
    /// Fills `mitigated`, `mitigated_err` and `reliable_flag` from the RC and NEC columns.
    pub fn finish(&mut self) {
        let m = mitigate(self.rc_mean, self.nec_mean);
        self.mitigated = m.value;
        self.reliable_flag = m.reliable;
        self.mitigated_err = mitigation_uncertainty(self.rc_mean, self.nec_mean, self.rc_stderr, self.nec_stderr);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub experiment: String,
    pub observable: String,
    pub rc_mode: String,
    pub shots: u64,
    pub twirls: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSeries {
    pub meta: SeriesMeta,
    pub rows: Vec<SeriesRow>,
}

impl ExperimentSeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path, meta: SeriesMeta) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<SeriesRow>, _>>()?;
        Ok(Self { meta, rows })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcs::{mean_field_angles, solve_gap, trotter_circuit, BcsParams, InteractionForm};
    use crate::channels::{Channel, DepolarizingChannel, QuasiLocalChannel};
    use crate::rng::rng_from_seed;
    use crate::sim::{simulate, JunctionNoise};

    fn params() -> BcsParams {
        BcsParams::new(vec![0.0, 1.0, 2.0], 0.8, 0.3, 15).unwrap()
    }

    fn trotter(k: usize) -> (Circuit, crate::circuit::LayoutTracker) {
        let p = params();
        let delta = solve_gap(&p.levels, p.g).unwrap();
        let mf = mean_field_angles(&p, delta);
        trotter_circuit(&p, &mf, k, InteractionForm::TwoCnot)
    }

    fn chain(ch: Channel) -> NoiseModel {
        let mut nm = NoiseModel::new(3);
        nm.set_junction(0, 1, JunctionNoise::new(ch.clone(), vec![2]).unwrap()).unwrap();
        nm.set_junction(1, 2, JunctionNoise::new(ch, vec![0]).unwrap()).unwrap();
        nm
    }

    fn local_chain(eps: f64) -> NoiseModel {
        let mut nm = NoiseModel::new(3);
        let ch: Channel = DepolarizingChannel::new(2, eps).unwrap().into();
        nm.set_junction(0, 1, JunctionNoise::new(ch.clone(), vec![]).unwrap()).unwrap();
        nm.set_junction(1, 2, JunctionNoise::new(ch, vec![]).unwrap()).unwrap();
        nm
    }

    #[test]
    fn nec_is_identity_up_to_permutation() {
        let (c, _) = trotter(1);
        let nec = build_nec(&c, &mut rng_from_seed(5)).unwrap();
        assert_eq!(nec.count_cnots(), 9);
        let rho = simulate(&nec, &NoiseModel::noiseless(3)).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-10);
        for label in ["ZII", "IZI", "IIZ", "ZIZ", "ZZZ"] {
            let p: PauliString = label.parse().unwrap();
            assert!((rho.expectation(&p).unwrap() - 1.0).abs() < 1e-10);
        }
        let empty = Circuit::from_gates(3, [Gate::sx(1)]).unwrap();
        let trivial = build_nec(&empty, &mut rng_from_seed(1)).unwrap();
        let rho = simulate(&trivial, &local_chain(0.3)).unwrap();
        assert!((rho.expectation(&"ZZZ".parse().unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nec_rejects_non_permutation() {
        let c = Circuit::from_gates(2, [Gate::cnot(0, 1)]).unwrap();
        assert!(matches!(build_nec(&c, &mut rng_from_seed(0)), Err(Error::NotNec(_))));
    }

    #[test]
    fn mitigation_arithmetic() {
        assert_eq!(mitigate(0.5, 1.0).value, 0.5);
        let m = mitigate(0.02, 0.05);
        assert!((m.value - 0.4).abs() < 1e-15 && m.reliable);
        assert!(!mitigate(0.01, 5e-4).reliable);
        assert!((mitigation_uncertainty(0.3, 0.6, 0.01, 0.0) - 0.01 / 0.6).abs() < 1e-15);
        assert!((mitigation_uncertainty(0.3, 1.0, 0.02, 0.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn global_noise_is_removed_exactly() {
        let nm = chain(QuasiLocalChannel::new(0.0, 0.0, 0.04).unwrap().into());
        for k in [1, 3, 6] {
            let (c, layout) = trotter(k);
            let rho = simulate(&c, &nm).unwrap();
            let ideal = simulate(&c, &NoiseModel::noiseless(3)).unwrap();
            let nec = build_nec(&c, &mut rng_from_seed(k as u64)).unwrap();
            let e_rho = simulate(&nec, &nm).unwrap();
            for label in ["XII", "IIZ", "XIZ", "XYZ"] {
                let obs = crate::bcs::to_physical(&label.parse().unwrap(), &layout);
                let support: Vec<usize> = (0..3).filter(|q| obs.factors()[*q] != crate::linalg::Pauli::I).collect();
                let e_obs = PauliString::from_sparse(3, &support.iter().map(|&q| (q, crate::linalg::Pauli::Z)).collect::<Vec<_>>());
                let e = e_rho.expectation(&e_obs).unwrap();
                let m = mitigate(rho.expectation(&obs).unwrap(), e).value;
                assert!((m - ideal.expectation(&obs).unwrap()).abs() < 1e-12, "{label} k={k}");
            }
        }
    }

    #[test]
    fn nec_prefactor_matches_simulation() {
        let eps = 0.03;
        let nm = local_chain(eps);
        for k in 1..=4 {
            let (c, _) = trotter(k);
            let nec = build_nec(&c, &mut rng_from_seed(10 + k as u64)).unwrap();
            let rho = simulate(&nec, &nm).unwrap();
            for m in [vec![0], vec![1], vec![2], vec![0, 2], vec![0, 1, 2]] {
                let pred = nec_prefactor(&nec, |_, _| eps, &m).unwrap();
                let obs = PauliString::from_sparse(3, &m.iter().map(|&q| (q, crate::linalg::Pauli::Z)).collect::<Vec<_>>());
                let got = rho.expectation(&obs).unwrap();
                assert!((pred - got).abs() < 1e-10, "k={k} m={m:?}: {pred} vs {got}");
            }
        }
        let solo = Circuit::from_gates(3, [Gate::cnot(0, 1), Gate::cnot(0, 1)]).unwrap();
        assert_eq!(nec_prefactor(&solo, |_, _| 0.1, &[2]).unwrap(), 1.0);
        assert!((nec_prefactor(&solo, |_, _| 0.1, &[0]).unwrap() - 0.81).abs() < 1e-15);
    }

    #[test]
    fn first_order_limits() {
        let (c, layout) = trotter(2);
        let obs = crate::bcs::to_physical(&"XIZ".parse().unwrap(), &layout);
        let sums = one_error_sums(&c, &NeighborMap::linear_chain(3), &obs).unwrap();
        assert_eq!(sums.n_cnot, 18);
        assert_eq!(first_order_prediction(&sums, 0.0, 0.0, 0.0), sums.o0);
        let nm = chain(QuasiLocalChannel::new(0.0, 0.0, 0.02).unwrap().into());
        let got = simulate(&c, &nm).unwrap().expectation(&obs).unwrap();
        assert!((first_order_prediction(&sums, 0.0, 0.0, 0.02) - got).abs() < 1e-12);
    }

    #[test]
    fn first_order_residual_is_quadratic() {
        let c = Circuit::from_gates(3, [Gate::ry(0, 0.7), Gate::sx(1), Gate::cnot(0, 1), Gate::ry(1, 0.4)]).unwrap();
        let obs: PauliString = "ZZI".parse().unwrap();
        let sums = one_error_sums(&c, &NeighborMap::linear_chain(3), &obs).unwrap();
        let residual = |l: f64| {
            let nm = chain(QuasiLocalChannel::new(l, 0.0, 0.0).unwrap().into());
            let got = simulate(&c, &nm).unwrap().expectation(&obs).unwrap();
            (first_order_prediction(&sums, l, 0.0, 0.0) - got).abs()
        };
        // A single CNOT has no second-order error terms.
        assert!(residual(0.04) < 1e-14);
    }

    #[test]
    fn ensemble_statistics_limits() {
        let s = ensemble_statistics(&[0.4; 10], u64::MAX).unwrap();
        assert!(s.sigma < 1e-9);
        assert!(ensemble_statistics(&[0.1], 100).is_err());
        let vals: Vec<f64> = (0..300).map(|i| 0.9 + 1e-4 * (i % 3) as f64).collect();
        let s = ensemble_statistics(&vals, 32000).unwrap();
        let expect_shot = (1.0 - 0.9f64.powi(2)) / (32000.0 * 300.0);
        assert!((s.shot_term - expect_shot).abs() / expect_shot < 0.01);
        assert!(s.shot_term > s.twirl_term);
    }

    #[test]
    fn series_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut row = SeriesRow {
            time: 0.3,
            observable: "X0".into(),
            raw: 0.4,
            rc_mean: 0.5,
            rc_stderr: 0.01,
            nec_mean: 0.8,
            nec_stderr: 0.01,
            mitigated: 0.0,
            mitigated_err: 0.0,
            trotter_ideal: 0.6,
            exact: 0.61,
            reliable_flag: false,
        };
        row.finish();
        assert!((row.mitigated - 0.625).abs() < 1e-15 && row.reliable_flag);
        let meta = SeriesMeta {
            experiment: "xyz".into(),
            observable: "X0".into(),
            rc_mode: "crosstalk".into(),
            shots: 100,
            twirls: 2,
            master_seed: 1,
        };
        let s = ExperimentSeries { meta: meta.clone(), rows: vec![row] };
        let p = dir.path().join("s.csv");
        s.write_csv(&p).unwrap();
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("time,observable,raw,rc_mean,rc_stderr,nec_mean,nec_stderr,mitigated,mitigated_err,trotter_ideal,exact,reliable_flag"));
        assert_eq!(ExperimentSeries::read_csv(&p, meta).unwrap(), s);
    }
}
