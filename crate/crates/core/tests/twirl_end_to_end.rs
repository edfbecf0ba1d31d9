//! Exhaustive dressing of one noisy CNOT run through the simulator must
//! reproduce the closed-form crosstalk twirl composed with the CNOT.

use xtalk_core::channels::{apply_channel, crosstalk_twirl_average, pauli_twirl_average, random_cptp, Axis, Channel};
use xtalk_core::circuit::{Circuit, Gate};
use xtalk_core::linalg::{ComplexMatrix, DensityMatrix, Pauli, C64};
use xtalk_core::rc::{correction_for, pauli_gate, rotation_gate};
use xtalk_core::rng::rng_from_seed;
use xtalk_core::sim::{simulate_from, JunctionNoise, NoiseModel};
use std::f64::consts::FRAC_PI_2;

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// Dressed CNOT(control, target) with an explicit twirl choice; `nb` is
/// `Some((pauli, axis))` for the crosstalk twirl of `neighbor`.
fn dressed(control: usize, target: usize, neighbor: usize, p: Pauli, q: Pauli, nb: Option<(Pauli, Axis)>) -> Circuit {
    let (r, s, _) = correction_for(p, q);
    let mut c = Circuit::new(3);
    let mut push = |g| c.push(g).unwrap();
    push(pauli_gate(control, p));
    push(pauli_gate(target, q));
    if let Some((t, axis)) = nb {
        push(pauli_gate(neighbor, t));
        push(rotation_gate(neighbor, axis, FRAC_PI_2));
    }
    push(Gate::cnot(control, target));
    push(pauli_gate(control, r));
    push(pauli_gate(target, s));
    if let Some((t, axis)) = nb {
        push(rotation_gate(neighbor, axis, -FRAC_PI_2));
        push(pauli_gate(neighbor, t));
    }
    c
}

fn random_state(seed: u64) -> DensityMatrix {
    let mut rng = rng_from_seed(seed);
    let ch = random_cptp(3, 3, &mut rng);
    apply_channel(&DensityMatrix::zero_state(3), &Channel::Kraus(ch), &[0, 1, 2]).unwrap()
}

fn max_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    a.matrix().max_abs_diff(b.matrix())
}

fn run(c: &Circuit, nm: &NoiseModel, rho: &DensityMatrix) -> DensityMatrix {
    let mut out = rho.clone();
    simulate_from(&mut out, c, nm).unwrap();
    out
}

fn average(rho: &DensityMatrix, circuits: &[Circuit], nm: &NoiseModel) -> DensityMatrix {
    let mut acc = ComplexMatrix::zeros(rho.dim(), rho.dim());
    for c in circuits {
        acc = &acc + run(c, nm, rho).matrix();
    }
    DensityMatrix::new(acc.scale(C64::new(1.0 / circuits.len() as f64, 0.0))).unwrap()
}

#[test]
fn crosstalk_dressing_realises_closed_form_twirl() {
    for (seed, (control, target, neighbor)) in [(1u64, (0, 1, 2)), (2, (1, 0, 2)), (3, (2, 1, 0))] {
        let noise = random_cptp(3, 4, &mut rng_from_seed(100 + seed));
        let mut nm = NoiseModel::new(3);
        nm.set_junction(control, target, JunctionNoise::new(Channel::Kraus(noise.clone()), vec![neighbor]).unwrap())
            .unwrap();
        let mut circuits = Vec::new();
        for p in PAULIS {
            for q in PAULIS {
                for t in PAULIS {
                    for axis in Axis::ALL {
                        circuits.push(dressed(control, target, neighbor, p, q, Some((t, axis))));
                    }
                }
            }
        }
        assert_eq!(circuits.len(), 16 * 12);
        let twirled = Channel::Pauli(crosstalk_twirl_average(&noise).unwrap());
        let mut ideal = Circuit::new(3);
        ideal.push(Gate::cnot(control, target)).unwrap();
        let noiseless = NoiseModel::noiseless(3);
        for s in 0..4 {
            let rho = random_state(1000 * seed + s);
            let got = average(&rho, &circuits, &nm);
            let want = apply_channel(&run(&ideal, &noiseless, &rho), &twirled, &[control, target, neighbor]).unwrap();
            assert!(max_diff(&got, &want) < 1e-10, "orientation {control}->{target}: {}", max_diff(&got, &want));
        }
    }
}

#[test]
fn standard_dressing_realises_pauli_twirl_on_active_pair() {
    let noise = random_cptp(2, 4, &mut rng_from_seed(7));
    let mut nm = NoiseModel::new(3);
    nm.set_junction(1, 2, JunctionNoise::new(Channel::Kraus(noise.clone()), vec![]).unwrap())
        .unwrap();
    let circuits: Vec<Circuit> = PAULIS
        .iter()
        .flat_map(|&p| PAULIS.iter().map(move |&q| dressed(1, 2, 0, p, q, None)))
        .collect();
    let twirled = Channel::Pauli(pauli_twirl_average(&noise));
    let mut ideal = Circuit::new(3);
    ideal.push(Gate::cnot(1, 2)).unwrap();
    for s in 0..4 {
        let rho = random_state(50 + s);
        let got = average(&rho, &circuits, &nm);
        let want = apply_channel(&run(&ideal, &NoiseModel::noiseless(3), &rho), &twirled, &[1, 2]).unwrap();
        assert!(max_diff(&got, &want) < 1e-10);
    }
}
