//! Density-matrix execution with noise attached after every CNOT, plus shot
//! sampling and readout correction.

mod readout;

use std::collections::BTreeMap;

pub use readout::{
    calibration_confusion, expectation_from_counts, expectation_from_distribution, multinomial,
    outcome_distribution, sample_counts, unfold, unfold_counts, Calibration, CalibrationMode,
    ConfusionMatrix, Counts, ReadoutModel, MAX_CONDITION, UNFOLD_ITERATIONS, UNFOLD_TOL,
};

use crate::channels::Channel;
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;

/// Noise attached to one junction. Channels act on
/// `[control, target, neighbors…]` and are applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct JunctionNoise {
    pub channels: Vec<Channel>,
    pub neighbors: Vec<usize>,
}

impl JunctionNoise {
    pub fn new(channel: Channel, neighbors: Vec<usize>) -> Result<Self> {
        let j = Self {
            channels: vec![],
            neighbors,
        };
        j.then(channel)
    }

    /// Appends a channel applied after the existing ones.
    pub fn then(mut self, channel: Channel) -> Result<Self> {
        if channel.n_qubits() != 2 + self.neighbors.len() {
            return Err(Error::InvalidChannel(format!(
                "{}-qubit channel on a junction with {} neighbours",
                channel.n_qubits(),
                self.neighbors.len()
            )));
        }
        self.channels.push(channel);
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    n_qubits: usize,
    junctions: BTreeMap<(usize, usize), JunctionNoise>,
    /// Error on CNOTs over junctions without noise instead of treating them as ideal.
    pub strict: bool,
    /// Depolarizing rate after every single-qubit gate (0 disables).
    pub single_qubit_depol: f64,
    pub readout: ReadoutModel,
}

impl NoiseModel {
    /// No junction noise, permissive coverage, ideal readout.
    pub fn noiseless(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            junctions: BTreeMap::new(),
            strict: false,
            single_qubit_depol: 0.0,
            readout: ReadoutModel::Ideal,
        }
    }

    /// Strict model with no junctions yet.
    pub fn new(n_qubits: usize) -> Self {
        Self {
            strict: true,
            ..Self::noiseless(n_qubits)
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn set_junction(&mut self, a: usize, b: usize, noise: JunctionNoise) -> Result<()> {
        let mut all = vec![a, b];
        all.extend(&noise.neighbors);
        for (i, q) in all.iter().enumerate() {
            if *q >= self.n_qubits || all[..i].contains(q) {
                return Err(Error::QubitIndex(format!(
                    "junction ({a}, {b}) with neighbours {:?} on {} qubits",
                    noise.neighbors, self.n_qubits
                )));
            }
        }
        self.junctions.insert((a.min(b), a.max(b)), noise);
        Ok(())
    }

    pub fn junction(&self, a: usize, b: usize) -> Option<&JunctionNoise> {
        self.junctions.get(&(a.min(b), a.max(b)))
    }

    pub fn junctions(&self) -> impl Iterator<Item = (&(usize, usize), &JunctionNoise)> {
        self.junctions.iter()
    }

    pub fn with_single_qubit_depol(mut self, lambda: f64) -> Self {
        self.single_qubit_depol = lambda;
        self
    }

    pub fn with_readout(mut self, readout: ReadoutModel) -> Self {
        self.readout = readout;
        self
    }
}

/// Runs `c` from `|0…0⟩`.
pub fn simulate(c: &Circuit, nm: &NoiseModel) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zero_state(c.n_qubits());
    simulate_from(&mut rho, c, nm)?;
    Ok(rho)
}

/// Applies the gates of `c` to `rho` in place.
pub fn simulate_from(rho: &mut DensityMatrix, c: &Circuit, nm: &NoiseModel) -> Result<()> {
    if rho.n_qubits() != c.n_qubits() || nm.n_qubits != c.n_qubits() {
        return Err(Error::Dimension(format!(
            "circuit on {} qubits, state on {}, noise model on {}",
            c.n_qubits(),
            rho.n_qubits(),
            nm.n_qubits
        )));
    }
    for g in c.gates() {
        apply_gate(rho, g, nm)?;
    }
    Ok(())
}

fn apply_gate(rho: &mut DensityMatrix, g: &Gate, nm: &NoiseModel) -> Result<()> {
    let Some(u) = g.matrix() else {
        return Ok(());
    };
    let qubits = g.qubits();
    rho.apply_unitary_mut(&u, &qubits)?;
    match *g {
        Gate::Cnot { control, target } => match nm.junction(control, target) {
            Some(noise) => {
                let mut targets = vec![control, target];
                targets.extend(&noise.neighbors);
                for ch in &noise.channels {
                    ch.apply(rho, &targets)?;
                }
            }
            None if nm.strict => return Err(Error::UnassignedJunction(control, target)),
            None => {}
        },
        _ if nm.single_qubit_depol > 0.0 => rho.depolarize_mut(&qubits, nm.single_qubit_depol)?,
        _ => {}
    }
    Ok(())
}
