use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bcs::{BcsParams, InteractionForm};
use crate::channels::{Channel, KrausChannel, QuasiLocalChannel};
use crate::circuit::{rz_matrix, Basis};
use crate::error::{Error, Result};
use crate::fitting::FitSettings;
use crate::linalg::embed;
use crate::observable::{all_observables, parse_bases, Observable};
use crate::rc::{NeighborMap, RcMode};
use crate::rng::digest_hex;
use crate::sim::{CalibrationMode, JunctionNoise, NoiseModel, ReadoutModel, UNFOLD_ITERATIONS};

/// Noise attached to one junction: quasi-local depolarizing rates, an
/// optional coherent Z rotation on each neighbour, or an explicit channel on
/// `[control, target, neighbors…]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionSpec {
    pub pair: [usize; 2],
    /// Defaults to the chain neighbours of the pair.
    #[serde(default)]
    pub neighbors: Option<Vec<usize>>,
    #[serde(default)]
    pub lambda_cnot: f64,
    #[serde(default)]
    pub lambda_neigh: f64,
    #[serde(default)]
    pub lambda_glob: f64,
    /// Angle of an `R_z` applied to every neighbour after the CNOT.
    #[serde(default)]
    pub neighbor_z_angle: f64,
    #[serde(default)]
    pub channel: Option<Channel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Empty means every chain junction is noiseless.
    pub junctions: Vec<JunctionSpec>,
    /// Symmetric flip probability on every qubit; ignored when `readout` is set.
    pub readout_flip: f64,
    pub readout: Option<ReadoutModel>,
    pub single_qubit_depol: f64,
    pub strict: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            junctions: vec![],
            readout_flip: 0.0,
            readout: None,
            single_qubit_depol: 0.0,
            strict: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RcSpec {
    pub mode: RcMode,
    pub count: usize,
}

impl Default for RcSpec {
    fn default() -> Self {
        Self {
            mode: RcMode::Crosstalk,
            count: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NecSpec {
    pub enabled: bool,
    /// Defaults to `rc.count`.
    pub count: Option<usize>,
}

impl Default for NecSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            count: None,
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecMode {
    None,
    PerQubit,
    #[default]
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecSpec {
    pub mode: RecMode,
    /// Shots per calibration circuit; defaults to the run's `shots`.
    pub shots: Option<u64>,
    pub iterations: usize,
}

impl Default for RecSpec {
    fn default() -> Self {
        Self {
            mode: RecMode::Full,
            shots: None,
            iterations: UNFOLD_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// One axis per logical qubit, e.g. `"XYZ"`.
    pub bases: String,
    /// Labels such as `X0Z2`; defaults to every parity of the measured qubits.
    #[serde(default)]
    pub observables: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSpec {
    pub enabled: bool,
    /// Experiment whose `rc_mean` columns are fitted; defaults to the first.
    pub experiment: Option<String>,
    pub settings: FitSettings,
}

fn default_shots() -> u64 {
    32000
}

fn default_experiments() -> Vec<ExperimentSpec> {
    vec![
        ExperimentSpec {
            name: "xyz".into(),
            bases: "XYZ".into(),
            observables: None,
        },
        ExperimentSpec {
            name: "zzz".into(),
            bases: "ZZZ".into(),
            observables: None,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bcs: BcsParams,
    #[serde(default)]
    pub interaction_form: InteractionForm,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub rc: RcSpec,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub nec: NecSpec,
    #[serde(default)]
    pub rec: RecSpec,
    #[serde(default = "default_experiments")]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub fit: FitSpec,
}

fn cfg_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// An experiment with its parsed bases and observables.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub bases: Vec<Basis>,
    pub observables: Vec<Observable>,
}

impl RunConfig {
    /// Three levels `{−1, 0, 1}`, `g = 0.5`, `Δt = 0.2`, 15 steps, other fields default.
    pub fn reference() -> Self {
        Self {
            bcs: BcsParams::new(vec![-1.0, 0.0, 1.0], 0.5, 0.2, 15).expect("valid parameters"),
            interaction_form: InteractionForm::default(),
            noise: NoiseSpec::default(),
            rc: RcSpec::default(),
            shots: default_shots(),
            nec: NecSpec::default(),
            rec: RecSpec::default(),
            experiments: default_experiments(),
            seed: 0,
            output: None,
            fit: FitSpec::default(),
        }
    }

    /// Parses JSON, reporting the field path of any schema error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.bcs.check()?;
        let n = self.bcs.n_levels();
        if n > crate::circuit::MAX_UNITARY_QUBITS {
            return Err(cfg_err("bcs.levels", format!("at most {} levels", crate::circuit::MAX_UNITARY_QUBITS)));
        }
        if self.bcs.n_steps == 0 {
            return Err(cfg_err("bcs.n_steps", "at least one step"));
        }
        if self.rc.count == 0 {
            return Err(cfg_err("rc.count", "must be at least 1"));
        }
        if self.nec.count == Some(0) {
            return Err(cfg_err("nec.count", "must be at least 1"));
        }
        if self.shots == 0 {
            return Err(cfg_err("shots", "must be at least 1"));
        }
        if self.rec.shots == Some(0) {
            return Err(cfg_err("rec.shots", "must be at least 1"));
        }
        if self.experiments.is_empty() {
            return Err(cfg_err("experiments", "at least one experiment"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            if !names.insert(&e.name)
                || e.name.is_empty()
                || !e.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(cfg_err(
                    &format!("experiments[{i}].name"),
                    "names must be unique, non-empty and alphanumeric",
                ));
            }
        }
        self.parsed_experiments()?;
        self.noise_model()?;
        if let Some(name) = &self.fit.experiment {
            if !self.experiments.iter().any(|e| &e.name == name) {
                return Err(cfg_err("fit.experiment", format!("no experiment named {name}")));
            }
        }
        Ok(())
    }

    pub fn parsed_experiments(&self) -> Result<Vec<Experiment>> {
        let n = self.bcs.n_levels();
        self.experiments
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let path = format!("experiments[{i}]");
                let bases = parse_bases(&e.bases).map_err(|err| cfg_err(&format!("{path}.bases"), err.to_string()))?;
                if bases.len() != n {
                    return Err(cfg_err(
                        &format!("{path}.bases"),
                        format!("{} bases for {n} qubits", bases.len()),
                    ));
                }
                let observables = match &e.observables {
                    None => all_observables(&bases),
                    Some(labels) => labels
                        .iter()
                        .map(|l| {
                            Observable::parse(&bases, l)
                                .map_err(|err| cfg_err(&format!("{path}.observables"), err.to_string()))
                        })
                        .collect::<Result<_>>()?,
                };
                Ok(Experiment {
                    name: e.name.clone(),
                    bases,
                    observables,
                })
            })
            .collect()
    }

    pub fn neighbor_map(&self) -> NeighborMap {
        let mut map = NeighborMap::linear_chain(self.bcs.n_levels());
        for j in &self.noise.junctions {
            if let Some(nb) = &j.neighbors {
                map.insert(j.pair[0], j.pair[1], nb.clone());
            }
        }
        map
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let n = self.bcs.n_levels();
        let chain = NeighborMap::linear_chain(n);
        let mut nm = NoiseModel::new(n);
        nm.strict = self.noise.strict;
        if !(0.0..=1.0).contains(&self.noise.single_qubit_depol) {
            return Err(cfg_err("noise.single_qubit_depol", "must lie in [0, 1]"));
        }
        nm.single_qubit_depol = self.noise.single_qubit_depol;
        if !(0.0..0.5).contains(&self.noise.readout_flip) {
            return Err(cfg_err("noise.readout_flip", "must lie in [0, 0.5)"));
        }
        nm.readout = match &self.noise.readout {
            Some(r) => r.clone(),
            None if self.noise.readout_flip > 0.0 => ReadoutModel::symmetric(n, self.noise.readout_flip),
            None => ReadoutModel::Ideal,
        };
        if self.noise.junctions.is_empty() {
            for a in 0..n.saturating_sub(1) {
                let nb = chain.neighbors(a, a + 1).to_vec();
                let ch: Channel = QuasiLocalChannel::with_neighbors(0.0, 0.0, 0.0, nb.len())?.into();
                nm.set_junction(a, a + 1, JunctionNoise::new(ch, nb)?)?;
            }
            return Ok(nm);
        }
        for (i, j) in self.noise.junctions.iter().enumerate() {
            let path = format!("noise.junctions[{i}]");
            let wrap = |e: Error| cfg_err(&path, e.to_string());
            let [a, b] = j.pair;
            if a >= n || b >= n || a.abs_diff(b) != 1 {
                return Err(cfg_err(&format!("{path}.pair"), "pair must be adjacent on the chain"));
            }
            let nb = j.neighbors.clone().unwrap_or_else(|| chain.neighbors(a, b).to_vec());
            let base: Channel = match &j.channel {
                Some(ch) => {
                    if j.lambda_cnot != 0.0 || j.lambda_neigh != 0.0 || j.lambda_glob != 0.0 {
                        return Err(cfg_err(&path, "give either rates or an explicit channel"));
                    }
                    ch.clone()
                }
                None => QuasiLocalChannel::with_neighbors(j.lambda_cnot, j.lambda_neigh, j.lambda_glob, nb.len())
                    .map_err(wrap)?
                    .into(),
            };
            let mut noise = JunctionNoise::new(base, nb.clone()).map_err(wrap)?;
            if j.neighbor_z_angle != 0.0 {
                if nb.is_empty() {
                    return Err(cfg_err(&format!("{path}.neighbor_z_angle"), "junction has no neighbours"));
                }
                let width = 2 + nb.len();
                let mut u = crate::linalg::ComplexMatrix::identity(1 << width);
                for q in 2..width {
                    u = &embed(&rz_matrix(j.neighbor_z_angle), &[q], width)? * &u;
                }
                noise = noise.then(KrausChannel::unitary(u).into()).map_err(wrap)?;
            }
            nm.set_junction(a, b, noise).map_err(wrap)?;
        }
        Ok(nm)
    }

    pub fn calibration_mode(&self) -> Option<CalibrationMode> {
        match self.rec.mode {
            RecMode::None => None,
            RecMode::PerQubit => Some(CalibrationMode::PerQubit),
            RecMode::Full => Some(CalibrationMode::Full),
        }
    }

    pub fn nec_count(&self) -> usize {
        self.nec.count.unwrap_or(self.rc.count)
    }

    /// SHA-256 of the config serialized with sorted keys.
    pub fn digest(&self) -> Result<String> {
        let v: Value = serde_json::to_value(self)?;
        Ok(digest_hex(canonical_json(&v).as_bytes()))
    }
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}
