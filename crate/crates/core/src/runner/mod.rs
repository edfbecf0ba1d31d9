//! Experiment orchestration: Trotter circuits, RC ensembles, noisy
//! simulation, readout correction, NEC mitigation and result files.

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    canonical_json, Experiment, ExperimentSpec, FitSpec, JunctionSpec, NecSpec, NoiseSpec, RcSpec, RecMode, RecSpec,
    RunConfig,
};
pub use report::{relative_error, summarize, summarize_series, total_variation, twirl_check, unfold_demo, Summary, TwirlCheck, TwirlReport, UnfoldDemo, VariantError};

use crate::bcs::{exact_evolution, mean_field_angles, solve_gap, to_physical, trotter_circuit, MeanFieldState};
use crate::circuit::{Basis, Circuit, LayoutTracker};
use crate::error::{Error, Result};
use crate::fitting::{fit, FitProblem, FitResult};
use crate::linalg::{DensityMatrix, PauliString};
use crate::mitigation::{build_nec, ensemble_statistics, ExperimentSeries, SeriesMeta, SeriesRow};
use crate::rc::{generate_ensemble, twirl_crosstalk, twirl_standard, NeighborMap, RcMode};
use crate::rng::{derive_labeled, rng_from_seed};
use crate::sim::{
    calibration_confusion, expectation_from_distribution, outcome_distribution, sample_counts, simulate, unfold, ConfusionMatrix, NoiseModel,
};

/// Everything fixed by a config before any sampling happens.
pub struct Pipeline {
    pub config: RunConfig,
    pub experiments: Vec<Experiment>,
    noise: NoiseModel,
    neighbors: NeighborMap,
    /// `circuits[k−1]`, `layouts[k−1]`: prep plus `k` steps and the layout after them.
    circuits: Vec<Circuit>,
    layouts: Vec<LayoutTracker>,
    ideal: Vec<DensityMatrix>,
    exact: Vec<DensityMatrix>,
    calibrations: BTreeMap<Vec<usize>, ConfusionMatrix>,
}

/// Per-observable mean and standard error.
#[derive(Clone, Debug, PartialEq)]
struct Estimate {
    mean: Vec<f64>,
    stderr: Vec<f64>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let p = &config.bcs;
        let delta = solve_gap(&p.levels, p.g)?;
        let mf: MeanFieldState = mean_field_angles(p, delta);
        let noise = config.noise_model()?;
        let neighbors = config.neighbor_map();
        let experiments = config.parsed_experiments()?;
        let (circuits, layouts): (Vec<_>, Vec<_>) = (1..=p.n_steps)
            .into_par_iter()
            .map(|k| trotter_circuit(p, &mf, k, config.interaction_form))
            .unzip();
        let ideal = circuits
            .par_iter()
            .map(|c| simulate(c, &NoiseModel::noiseless(c.n_qubits())))
            .collect::<Result<Vec<_>>>()?;
        let times: Vec<f64> = p.times()[1..].to_vec();
        let exact = exact_evolution(p, &mf, &times)?;
        let mut pipeline = Self {
            config,
            experiments,
            noise,
            neighbors,
            circuits,
            layouts,
            ideal,
            exact,
            calibrations: BTreeMap::new(),
        };
        pipeline.calibrate()?;
        Ok(pipeline)
    }

    fn calibrate(&mut self) -> Result<()> {
        let Some(mode) = self.config.calibration_mode() else {
            return Ok(());
        };
        let orders: BTreeSet<Vec<usize>> = self.layouts.iter().map(|l| l.permutation().to_vec()).collect();
        let shots = self.config.rec.shots.unwrap_or(self.config.shots);
        for (i, order) in orders.into_iter().enumerate() {
            let truth = self.noise.readout.confusion(&order)?;
            let mut rng = rng_from_seed(derive_labeled(self.config.seed, "rec", i as u64));
            let cal = calibration_confusion(&truth, mode, shots, &mut rng)?;
            self.calibrations.insert(order, cal.matrix);
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.circuits.len()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Trotter circuit for step `k` with the experiment's basis rotations
    /// appended; qubit `j` of the measurement order is logical qubit `j`.
    pub fn measured_circuit(&self, exp: &Experiment, k: usize) -> Result<(Circuit, Vec<usize>)> {
        let layout = &self.layouts[k - 1];
        let mut c = self.circuits[k - 1].clone();
        let order: Vec<usize> = (0..exp.bases.len()).map(|j| layout.physical(j)).collect();
        for (j, &q) in order.iter().enumerate() {
            c.measure(q, exp.bases[j])?;
        }
        Ok((c.append_basis_rotation(), order))
    }

    /// Noiseless outcome distribution over the measurement order of every step.
    pub fn ideal_distributions(&self, exp: &Experiment) -> Result<Vec<Vec<f64>>> {
        (1..=self.n_steps())
            .map(|k| {
                let (c, order) = self.measured_circuit(exp, k)?;
                let rho = simulate(&c, &NoiseModel::noiseless(c.n_qubits()))?;
                let bases: Vec<(usize, Basis)> = order.iter().map(|&q| (q, Basis::Z)).collect();
                outcome_distribution(&rho, &bases)
            })
            .collect()
    }

    /// Samples `rho` in Z on `order`, optionally unfolds, and returns every observable.
    fn measure(&self, exp: &Experiment, rho: &DensityMatrix, order: &[usize], correct: bool, seed: u64) -> Result<Vec<f64>> {
        let truth = self.noise.readout.confusion(order)?;
        let bases: Vec<(usize, Basis)> = order.iter().map(|&q| (q, Basis::Z)).collect();
        let counts = sample_counts(rho, &bases, self.config.shots, &truth, &mut rng_from_seed(seed))?;
        let probs = match (correct, self.calibrations.get(order)) {
            (true, Some(cal)) => unfold(&counts.frequencies(), cal, self.config.rec.iterations, None)?,
            _ => counts.frequencies(),
        };
        Ok(exp
            .observables
            .iter()
            .map(|o| expectation_from_distribution(&probs, &o.bits))
            .collect())
    }

    fn aggregate(&self, exp: &Experiment, per_member: &[Vec<f64>]) -> Result<Estimate> {
        let n_obs = exp.observables.len();
        let mut mean = Vec::with_capacity(n_obs);
        let mut stderr = Vec::with_capacity(n_obs);
        for o in 0..n_obs {
            let vals: Vec<f64> = per_member.iter().map(|m| m[o]).collect();
            if vals.len() == 1 {
                mean.push(vals[0]);
                stderr.push(((1.0 - vals[0] * vals[0]).max(0.0) / self.config.shots as f64).sqrt());
            } else {
                let s = ensemble_statistics(&vals, self.config.shots)?;
                mean.push(s.mean);
                stderr.push(s.sigma);
            }
        }
        Ok(Estimate { mean, stderr })
    }

    fn raw(&self, exp: &Experiment, k: usize) -> Result<Vec<f64>> {
        let (c, order) = self.measured_circuit(exp, k)?;
        let rho = simulate(&c, &self.noise)?;
        self.measure(exp, &rho, &order, false, derive_labeled(self.config.seed, &format!("raw:{}", exp.name), k as u64))
    }

    fn rc(&self, exp: &Experiment, k: usize) -> Result<Estimate> {
        let (c, order) = self.measured_circuit(exp, k)?;
        let master = derive_labeled(self.config.seed, &format!("rc:{}", exp.name), k as u64);
        let ens = generate_ensemble(&c, self.config.rc.mode, self.config.rc.count, master, &self.neighbors)?;
        let per_member = ens
            .members
            .par_iter()
            .map(|m| {
                let rho = simulate(&m.circuit, &self.noise)?;
                self.measure(exp, &rho, &order, true, derive_labeled(master, "shots", m.index as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        self.aggregate(exp, &per_member)
    }

    fn nec(&self, exp: &Experiment, k: usize) -> Result<Estimate> {
        let (c, order) = self.measured_circuit(exp, k)?;
        let master = derive_labeled(self.config.seed, &format!("nec:{}", exp.name), k as u64);
        let per_member = (0..self.config.nec_count())
            .into_par_iter()
            .map(|i| {
                let i = i as u64;
                let nec = build_nec(&c, &mut rng_from_seed(derive_labeled(master, "prep", i)))?;
                let mut trng = rng_from_seed(derive_labeled(master, "twirl", i));
                let dressed = match self.config.rc.mode {
                    RcMode::None => nec,
                    RcMode::Standard => twirl_standard(&nec, &mut trng).0,
                    RcMode::Crosstalk => twirl_crosstalk(&nec, &self.neighbors, &mut trng)?.0,
                };
                let rho = simulate(&dressed, &self.noise)?;
                self.measure(exp, &rho, &order, true, derive_labeled(master, "shots", i))
            })
            .collect::<Result<Vec<_>>>()?;
        self.aggregate(exp, &per_member)
    }

    /// One row per observable for step `k` (1-based).
    pub fn step_rows(&self, exp: &Experiment, k: usize) -> Result<Vec<SeriesRow>> {
        if k == 0 || k > self.n_steps() {
            return Err(Error::Config {
                path: "bcs.n_steps".into(),
                msg: format!("step {k} outside 1..={}", self.n_steps()),
            });
        }
        let raw = self.raw(exp, k)?;
        let rc = self.rc(exp, k)?;
        let nec = if self.config.nec.enabled {
            self.nec(exp, k)?
        } else {
            Estimate {
                mean: vec![1.0; exp.observables.len()],
                stderr: vec![0.0; exp.observables.len()],
            }
        };
        let layout = &self.layouts[k - 1];
        let time = k as f64 * self.config.bcs.dt;
        exp.observables
            .iter()
            .enumerate()
            .map(|(o, obs)| {
                let mut row = SeriesRow {
                    time,
                    observable: obs.label.clone(),
                    raw: raw[o],
                    rc_mean: rc.mean[o],
                    rc_stderr: rc.stderr[o],
                    nec_mean: nec.mean[o],
                    nec_stderr: nec.stderr[o],
                    mitigated: 0.0,
                    mitigated_err: 0.0,
                    trotter_ideal: self.ideal[k - 1].expectation(&to_physical(&obs.pauli, layout))?,
                    exact: self.exact[k - 1].expectation(&obs.pauli)?,
                    reliable_flag: false,
                };
                row.finish();
                Ok(row)
            })
            .collect()
    }

    /// Every step of one experiment, grouped per observable.
    pub fn run_experiment(&self, exp: &Experiment) -> Result<Vec<ExperimentSeries>> {
        let steps = (1..=self.n_steps())
            .into_par_iter()
            .map(|k| self.step_rows(exp, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(exp
            .observables
            .iter()
            .enumerate()
            .map(|(o, obs)| ExperimentSeries {
                meta: SeriesMeta {
                    experiment: exp.name.clone(),
                    observable: obs.label.clone(),
                    rc_mode: rc_mode_name(self.config.rc.mode).into(),
                    shots: self.config.shots,
                    twirls: self.config.rc.count,
                    master_seed: self.config.seed,
                },
                rows: steps.iter().map(|s| s[o].clone()).collect(),
            })
            .collect())
    }
}

pub fn rc_mode_name(m: RcMode) -> &'static str {
    match m {
        RcMode::None => "none",
        RcMode::Standard => "standard",
        RcMode::Crosstalk => "crosstalk",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub code_version: String,
    pub master_seed: u64,
    /// Stage labels fed to the seed splitter; each stage seed is
    /// `derive_labeled(master_seed, label, step)`.
    pub seed_stages: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

/// Removes every file listed unless disarmed.
struct Cleanup {
    files: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.files {
                let _ = std::fs::remove_file(f);
            }
        }
    }
}

fn write_series(dir: &Path, series: &ExperimentSeries, cleanup: &mut Cleanup) -> Result<Vec<String>> {
    let stem = format!("series_{}_{}", series.meta.experiment, series.meta.observable);
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    cleanup.files.push(csv.clone());
    series.write_csv(&csv)?;
    cleanup.files.push(json.clone());
    series.write_json(&json)?;
    Ok(vec![format!("{stem}.csv"), format!("{stem}.json")])
}

/// Runs every experiment, writes `series_<experiment>_<observable>.{csv,json}`,
/// optional `fit.json` and `manifest.json` into `out`. Outputs written before
/// a failure are removed.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out)?;
    let mut cleanup = Cleanup {
        files: vec![],
        armed: true,
    };
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let pipeline = Pipeline::new(config.clone())?;
    timings.insert("setup".to_string(), t0.elapsed().as_secs_f64());
    let mut outputs = Vec::new();
    let mut all = Vec::new();
    for exp in &pipeline.experiments {
        let t = Instant::now();
        info!("running experiment {}", exp.name);
        let series = pipeline.run_experiment(exp)?;
        for s in &series {
            outputs.extend(write_series(out, s, &mut cleanup)?);
        }
        timings.insert(format!("experiment:{}", exp.name), t.elapsed().as_secs_f64());
        all.push((exp.name.clone(), series));
    }
    if config.fit.enabled {
        let t = Instant::now();
        let name = config.fit.experiment.clone().unwrap_or_else(|| config.experiments[0].name.clone());
        let series = &all.iter().find(|(n, _)| *n == name).expect("validated experiment name").1;
        let result = fit_series(&pipeline, &name, series, config.seed)?;
        let path = out.join("fit.json");
        cleanup.files.push(path.clone());
        std::fs::write(&path, serde_json::to_string_pretty(&result)?)?;
        outputs.push("fit.json".into());
        timings.insert("fit".to_string(), t.elapsed().as_secs_f64());
    }
    let mut seed_stages = vec!["rec".to_string()];
    for e in &pipeline.experiments {
        for stage in ["raw", "rc", "nec"] {
            seed_stages.push(format!("{stage}:{}", e.name));
        }
    }
    let manifest = RunManifest {
        config_digest: config.digest()?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.seed,
        seed_stages,
        timings_s: timings,
        outputs,
    };
    let path = out.join("manifest.json");
    cleanup.files.push(path.clone());
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    cleanup.armed = false;
    Ok(manifest)
}

/// Fits the chain rates to the `rc_mean` columns of one experiment.
pub fn fit_series(pipeline: &Pipeline, experiment: &str, series: &[ExperimentSeries], seed: u64) -> Result<FitResult> {
    let exp = pipeline
        .experiments
        .iter()
        .find(|e| e.name == experiment)
        .ok_or_else(|| Error::Config {
            path: "fit.experiment".into(),
            msg: format!("no experiment named {experiment}"),
        })?;
    let observables: Vec<PauliString> = exp.observables.iter().map(|o| o.pauli.clone()).collect();
    let targets: Vec<Vec<f64>> = exp
        .observables
        .iter()
        .map(|o| {
            series
                .iter()
                .find(|s| s.meta.observable == o.label)
                .map(|s| s.rows.iter().map(|r| r.rc_mean).collect())
                .ok_or_else(|| Error::Config {
                    path: "fit".into(),
                    msg: format!("missing series for {}", o.label),
                })
        })
        .collect::<Result<_>>()?;
    let cfg = &pipeline.config;
    let problem = FitProblem::new(cfg.bcs.clone(), cfg.interaction_form, observables, targets)?;
    fit(&problem, &cfg.fit.settings, derive_labeled(seed, "fit", 0))
}

/// Reads back the series JSON files of one experiment from a run directory.
pub fn load_series(dir: &Path, experiment: &str) -> Result<Vec<ExperimentSeries>> {
    let prefix = format!("series_{experiment}_");
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(&prefix))
        })
        .collect();
    names.sort();
    names
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect()
}
