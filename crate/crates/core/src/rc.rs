//! Randomized compiling: Pauli twirls around every CNOT, optionally extended
//! with Pauli plus π/2-rotation twirls on the idle neighbours of the junction.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::Axis;
use crate::circuit::{cnot_matrix, Circuit, Gate};
use crate::error::{Error, Result};
use crate::linalg::{Pauli, PauliString, Phase};
use crate::rng::{derive_seed, digest_hex, rng_from_seed};

/// Pauli as an exact U gate.
pub fn pauli_gate(qubit: usize, p: Pauli) -> Gate {
    match p {
        Pauli::I => Gate::u(qubit, 0.0, 0.0, 0.0),
        Pauli::X => Gate::u(qubit, PI, 0.0, PI),
        Pauli::Y => Gate::u(qubit, PI, FRAC_PI_2, FRAC_PI_2),
        Pauli::Z => Gate::u(qubit, 0.0, 0.0, PI),
    }
}

/// `R_axis(θ) = e^{−i(θ/2)σ}` as a gate.
pub fn rotation_gate(qubit: usize, axis: Axis, theta: f64) -> Gate {
    match axis {
        Axis::X => Gate::rx(qubit, theta),
        Axis::Y => Gate::ry(qubit, theta),
        Axis::Z => Gate::rz(qubit, theta),
    }
}

fn compute_correction(p: Pauli, q: Pauli) -> (Pauli, Pauli, Phase) {
    let c = cnot_matrix();
    let pq = PauliString::new(vec![p, q], Phase::ONE).to_matrix();
    let conj = &(&c * &pq) * &c;
    for idx in 0..16 {
        let cand = PauliString::from_index(2, idx);
        let m = cand.to_matrix();
        // Both are unitary, so any nonzero entry fixes the candidate phase.
        let (k, pivot) = m
            .data()
            .iter()
            .enumerate()
            .find(|(_, z)| z.norm() > 0.5)
            .expect("Pauli matrices have nonzero entries");
        let ratio = conj.data()[k] / pivot;
        if let Some(phase) = Phase::from_complex(ratio, 1e-14) {
            if conj.max_abs_diff(&m.scale(phase.value())) < 1e-14 {
                let f = cand.factors();
                return (f[0], f[1], phase);
            }
        }
    }
    unreachable!("CNOT conjugation maps Paulis to Paulis");
}

fn correction_table() -> &'static [(Pauli, Pauli, Phase); 16] {
    static TABLE: OnceLock<[(Pauli, Pauli, Phase); 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let table: [(Pauli, Pauli, Phase); 16] =
            std::array::from_fn(|i| compute_correction(Pauli::from_index(i & 3), Pauli::from_index(i >> 2)));
        // Self-check: R⊗S·phase must equal CNOT·(P⊗Q)·CNOT for every entry.
        let c = cnot_matrix();
        for (i, (r, s, ph)) in table.iter().enumerate() {
            let pq = PauliString::new(vec![Pauli::from_index(i & 3), Pauli::from_index(i >> 2)], Phase::ONE);
            let lhs = PauliString::new(vec![*r, *s], *ph).to_matrix();
            let rhs = &(&c * &pq.to_matrix()) * &c;
            assert!(lhs.max_abs_diff(&rhs) < 1e-14, "correction table entry {i} is wrong");
        }
        table
    })
}

/// `(R, S, phase)` with `R⊗S·phase = CNOT·(P⊗Q)·CNOT`; `P`, `R` on the control.
pub fn correction_for(p: Pauli, q: Pauli) -> (Pauli, Pauli, Phase) {
    correction_table()[p.index() | (q.index() << 2)]
}

/// Twirl drawn for one idle neighbour.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborTwirl {
    pub qubit: usize,
    pub pauli: Pauli,
    pub axis: Axis,
}

/// Twirl drawn for one CNOT.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnotTwirl {
    pub control: usize,
    pub target: usize,
    pub pre: (Pauli, Pauli),
    pub post: (Pauli, Pauli),
    /// Global phase dropped when the correction is emitted as gates.
    pub phase: u8,
    pub neighbors: Vec<NeighborTwirl>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwirlConfig {
    pub cnots: Vec<CnotTwirl>,
}

/// Idle neighbours of each junction, keyed by the unordered qubit pair.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborMap {
    map: BTreeMap<(usize, usize), Vec<usize>>,
}

impl NeighborMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// On a chain, junction `(i, i+1)` has neighbours `i−1` and `i+2` where they exist.
    pub fn linear_chain(n: usize) -> Self {
        let mut map = BTreeMap::new();
        for i in 0..n.saturating_sub(1) {
            let mut nb = Vec::new();
            if i > 0 {
                nb.push(i - 1);
            }
            if i + 2 < n {
                nb.push(i + 2);
            }
            map.insert((i, i + 1), nb);
        }
        Self { map }
    }

    pub fn insert(&mut self, a: usize, b: usize, neighbors: Vec<usize>) {
        self.map.insert((a.min(b), a.max(b)), neighbors);
    }

    pub fn neighbors(&self, a: usize, b: usize) -> &[usize] {
        self.map
            .get(&(a.min(b), a.max(b)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.map.values().all(Vec::is_empty)
    }
}

fn random_pauli<R: Rng + ?Sized>(rng: &mut R) -> Pauli {
    Pauli::from_index(rng.random_range(0..4))
}

fn dress<R: Rng + ?Sized>(
    c: &Circuit,
    neighbors: Option<&NeighborMap>,
    rng: &mut R,
) -> Result<(Circuit, TwirlConfig)> {
    let mut out = Circuit::new(c.n_qubits());
    for (q, b) in c.measure_basis().iter().enumerate() {
        if let Some(b) = b {
            out.measure(q, *b)?;
        }
    }
    let mut config = TwirlConfig::default();
    for g in c.gates() {
        let Gate::Cnot { control, target } = *g else {
            out.push(g.clone())?;
            continue;
        };
        let nbs: Vec<usize> = neighbors
            .map(|m| m.neighbors(control, target).to_vec())
            .unwrap_or_default();
        for &k in &nbs {
            if k == control || k == target {
                return Err(Error::NeighborCollision {
                    control,
                    target,
                    neighbor: k,
                });
            }
        }
        let (p, q) = (random_pauli(rng), random_pauli(rng));
        let (r, s, phase) = correction_for(p, q);
        let nb_twirls: Vec<NeighborTwirl> = nbs
            .iter()
            .map(|&k| NeighborTwirl {
                qubit: k,
                pauli: random_pauli(rng),
                axis: Axis::ALL[rng.random_range(0..3)],
            })
            .collect();
        let mut fence = vec![control, target];
        fence.extend(&nbs);
        out.push(Gate::Barrier(fence.clone()))?;
        out.push(pauli_gate(control, p))?;
        out.push(pauli_gate(target, q))?;
        for t in &nb_twirls {
            out.push(pauli_gate(t.qubit, t.pauli))?;
            out.push(rotation_gate(t.qubit, t.axis, FRAC_PI_2))?;
        }
        out.push(Gate::Barrier(fence.clone()))?;
        out.push(g.clone())?;
        out.push(Gate::Barrier(fence.clone()))?;
        out.push(pauli_gate(control, r))?;
        out.push(pauli_gate(target, s))?;
        for t in &nb_twirls {
            out.push(rotation_gate(t.qubit, t.axis, -FRAC_PI_2))?;
            out.push(pauli_gate(t.qubit, t.pauli))?;
        }
        out.push(Gate::Barrier(fence))?;
        config.cnots.push(CnotTwirl {
            control,
            target,
            pre: (p, q),
            post: (r, s),
            phase: phase.power(),
            neighbors: nb_twirls,
        });
    }
    Ok((out, config))
}

/// Random Pauli pair before each CNOT and the matching correction after.
pub fn twirl_standard<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> (Circuit, TwirlConfig) {
    dress(c, None, rng).expect("standard dressing cannot collide")
}

/// Standard twirl plus, on every neighbour of the junction, a Pauli `T` and
/// rotation `R(π/2)` before the CNOT and `R(−π/2)`, `T` after.
pub fn twirl_crosstalk<R: Rng + ?Sized>(
    c: &Circuit,
    neighbors: &NeighborMap,
    rng: &mut R,
) -> Result<(Circuit, TwirlConfig)> {
    dress(c, Some(neighbors), rng)
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RcMode {
    None,
    #[default]
    Standard,
    Crosstalk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcMember {
    pub index: usize,
    pub seed: u64,
    pub config: TwirlConfig,
    pub circuit: Circuit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcEnsemble {
    pub base_digest: String,
    pub master_seed: u64,
    pub mode: RcMode,
    pub members: Vec<RcMember>,
}

/// `count` dressed copies, member `i` seeded with `derive_seed(master_seed, i)`.
/// `RcMode::None` yields `count` undressed copies.
pub fn generate_ensemble(
    c: &Circuit,
    mode: RcMode,
    count: usize,
    master_seed: u64,
    neighbors: &NeighborMap,
) -> Result<RcEnsemble> {
    if count == 0 {
        return Err(Error::Config {
            path: "rc.count".into(),
            msg: "ensemble size must be at least 1".into(),
        });
    }
    let members = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, i as u64);
            let mut rng = rng_from_seed(seed);
            let (circuit, config) = match mode {
                RcMode::None => (c.clone(), TwirlConfig::default()),
                RcMode::Standard => twirl_standard(c, &mut rng),
                RcMode::Crosstalk => twirl_crosstalk(c, neighbors, &mut rng)?,
            };
            Ok(RcMember {
                index: i,
                seed,
                config,
                circuit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RcEnsemble {
        base_digest: digest_hex(c.to_text().as_bytes()),
        master_seed,
        mode,
        members,
    })
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    seed: u64,
    file: String,
    digest: String,
}

#[derive(Serialize, Deserialize)]
struct EnsembleManifest {
    master_seed: u64,
    mode: RcMode,
    count: usize,
    base_digest: String,
    members: Vec<ManifestEntry>,
}

impl RcEnsemble {
    /// Writes `member_NNNN.txt` circuit files and `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let text = m.circuit.to_text();
            let file = format!("member_{:04}.txt", m.index);
            std::fs::write(dir.join(&file), &text)?;
            let config = serde_json::to_vec(&m.config)?;
            entries.push(ManifestEntry {
                index: m.index,
                seed: m.seed,
                file,
                digest: digest_hex(&config),
            });
        }
        let manifest = EnsembleManifest {
            master_seed: self.master_seed,
            mode: self.mode,
            count: self.members.len(),
            base_digest: self.base_digest.clone(),
            members: entries,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
