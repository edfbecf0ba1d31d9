//! Least-squares recovery of the five quasi-local rates of a 3-qubit chain
//! from observable time series, with a bounded Nelder–Mead search.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bcs::{mean_field_angles, prep_circuit, solve_gap, to_physical, trotter_step, BcsParams, InteractionForm};
use crate::channels::{Channel, QuasiLocalChannel};
use crate::circuit::LayoutTracker;
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, PauliString};
use crate::rng::{digest_hex, rng_from_seed};
use crate::sim::{simulate_from, JunctionNoise, NoiseModel};

pub const N_PARAMS: usize = 5;

/// Rates in the order `(λ_cnot⁰¹, λ_cnot¹², λ_neigh⁰¹, λ_neigh¹², λ_glob)`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRates {
    pub cnot_01: f64,
    pub cnot_12: f64,
    pub neigh_01: f64,
    pub neigh_12: f64,
    pub glob: f64,
}

impl ChainRates {
    pub fn from_array(a: [f64; N_PARAMS]) -> Self {
        Self {
            cnot_01: a[0],
            cnot_12: a[1],
            neigh_01: a[2],
            neigh_12: a[3],
            glob: a[4],
        }
    }

    pub fn to_array(self) -> [f64; N_PARAMS] {
        [self.cnot_01, self.cnot_12, self.neigh_01, self.neigh_12, self.glob]
    }

    /// Quasi-local noise on junctions `(0,1)` (neighbour 2) and `(1,2)` (neighbour 0).
    pub fn noise_model(self) -> Result<NoiseModel> {
        let mut nm = NoiseModel::new(3);
        let a: Channel = QuasiLocalChannel::new(self.cnot_01, self.neigh_01, self.glob)?.into();
        let b: Channel = QuasiLocalChannel::new(self.cnot_12, self.neigh_12, self.glob)?.into();
        nm.set_junction(0, 1, JunctionNoise::new(a, vec![2])?)?;
        nm.set_junction(1, 2, JunctionNoise::new(b, vec![0])?)?;
        Ok(nm)
    }
}

/// Noiseless-shot forward model: `[observable][step]` for steps `1..=n_steps`,
/// observables given on logical qubits.
pub fn forward_series(
    p: &BcsParams,
    form: InteractionForm,
    nm: &NoiseModel,
    observables: &[PauliString],
) -> Result<Vec<Vec<f64>>> {
    let delta = solve_gap(&p.levels, p.g)?;
    let mf = mean_field_angles(p, delta);
    let n = p.n_levels();
    let mut rho = DensityMatrix::zero_state(n);
    simulate_from(&mut rho, &prep_circuit(&mf), nm)?;
    let mut layout = LayoutTracker::identity(n);
    let mut out = vec![Vec::with_capacity(p.n_steps); observables.len()];
    for _ in 0..p.n_steps {
        let (step, next) = trotter_step(p, &layout, form);
        simulate_from(&mut rho, &step, nm)?;
        layout = next;
        for (o, series) in observables.iter().zip(out.iter_mut()) {
            series.push(rho.expectation(&to_physical(o, &layout))?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitProblem {
    pub bcs: BcsParams,
    pub form: InteractionForm,
    pub observables: Vec<PauliString>,
    /// `[observable][step]`, steps `1..=n_steps`.
    pub targets: Vec<Vec<f64>>,
}

impl FitProblem {
    pub fn new(bcs: BcsParams, form: InteractionForm, observables: Vec<PauliString>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if bcs.n_levels() != 3 {
            return Err(Error::Config {
                path: "bcs.levels".into(),
                msg: "rate fitting is defined for three levels".into(),
            });
        }
        if targets.len() != observables.len()
            || targets.iter().any(|t| t.len() != bcs.n_steps || t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Dimension(format!(
                "targets must be {} finite series of {} steps",
                observables.len(),
                bcs.n_steps
            )));
        }
        Ok(Self {
            bcs,
            form,
            observables,
            targets,
        })
    }

    pub fn n_residuals(&self) -> usize {
        self.observables.len() * self.bcs.n_steps
    }

    /// Simulated minus target over every (observable, step) cell.
    pub fn residuals(&self, rates: ChainRates) -> Result<Vec<f64>> {
        let sim = forward_series(&self.bcs, self.form, &rates.noise_model()?, &self.observables)?;
        Ok(sim
            .iter()
            .zip(&self.targets)
            .flat_map(|(s, t)| s.iter().zip(t).map(|(a, b)| a - b))
            .collect())
    }

    /// Mean squared residual.
    pub fn chi2(&self, rates: ChainRates) -> Result<f64> {
        let r = self.residuals(rates)?;
        Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    /// Candidate values per rate for the starting grid.
    pub grid: Vec<f64>,
    /// Number of best grid points refined by the simplex search.
    pub restarts: usize,
    pub max_evals: usize,
    pub initial_step: f64,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            grid: vec![0.0, 0.02, 0.06],
            restarts: 3,
            max_evals: 4000,
            initial_step: 0.01,
            xtol: 1e-8,
            ftol: 1e-16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambdas: ChainRates,
    /// Mean squared residual over all cells.
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub settings_digest: String,
}

/// Clamps into `[0, 1]` and rescales a junction whose three rates exceed 1.
fn project(x: &mut [f64; N_PARAMS]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    for (c, n) in [(0, 2), (1, 3)] {
        let s = x[c] + x[n] + x[4];
        if s > 1.0 {
            x[c] /= s;
            x[n] /= s;
            x[4] /= s;
        }
    }
}

struct Search<'a> {
    problem: &'a FitProblem,
    evals: usize,
}

impl Search<'_> {
    fn f(&mut self, x: &[f64; N_PARAMS]) -> Result<f64> {
        self.evals += 1;
        self.problem.chi2(ChainRates::from_array(*x))
    }

    /// Nelder–Mead with every trial point projected onto the box. Returns the
    /// best vertex, its value, and whether the tolerances were met.
    fn nelder_mead(
        &mut self,
        start: [f64; N_PARAMS],
        step: f64,
        s: &FitSettings,
        budget: usize,
    ) -> Result<([f64; N_PARAMS], f64, bool)> {
        let limit = self.evals + budget;
        let mut simplex: Vec<([f64; N_PARAMS], f64)> = Vec::with_capacity(N_PARAMS + 1);
        let mut x0 = start;
        project(&mut x0);
        simplex.push((x0, self.f(&x0)?));
        for i in 0..N_PARAMS {
            let mut x = x0;
            // Step inward when the start sits on the upper face.
            x[i] += if x[i] + step <= 1.0 { step } else { -step };
            project(&mut x);
            simplex.push((x, self.f(&x)?));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (best, worst) = (simplex[0].1, simplex[N_PARAMS].1);
            let diam = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if (worst - best).abs() <= s.ftol.max(1e-12 * best.abs()) && diam <= s.xtol {
                return Ok((simplex[0].0, best, true));
            }
            if self.evals >= limit {
                return Ok((simplex[0].0, best, false));
            }
            let mut centroid = [0.0; N_PARAMS];
            for (x, _) in &simplex[..N_PARAMS] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / N_PARAMS as f64;
                }
            }
            let toward = |t: f64, from: &[f64; N_PARAMS]| {
                let mut y = [0.0; N_PARAMS];
                for i in 0..N_PARAMS {
                    y[i] = centroid[i] + t * (from[i] - centroid[i]);
                }
                project(&mut y);
                y
            };
            let w = simplex[N_PARAMS].0;
            let xr = toward(-1.0, &w);
            let fr = self.f(&xr)?;
            if fr < simplex[0].1 {
                let xe = toward(-2.0, &w);
                let fe = self.f(&xe)?;
                simplex[N_PARAMS] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[N_PARAMS - 1].1 {
                simplex[N_PARAMS] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[N_PARAMS].1 {
                let x = toward(-0.5, &w);
                (x, self.f(&x)?)
            } else {
                let x = toward(0.5, &w);
                (x, self.f(&x)?)
            };
            if fc < fr.min(simplex[N_PARAMS].1) {
                simplex[N_PARAMS] = (xc, fc);
                continue;
            }
            let b = simplex[0].0;
            for v in simplex[1..].iter_mut() {
                let mut x = [0.0; N_PARAMS];
                for i in 0..N_PARAMS {
                    x[i] = b[i] + 0.5 * (v.0[i] - b[i]);
                }
                project(&mut x);
                *v = (x, self.f(&x)?);
            }
        }
    }
}

/// Grid scan, simplex refinement of the best `restarts` grid points (with a
/// seeded jitter), then simplex restarts from the incumbent until it stops
/// improving. Deterministic for a fixed seed.
pub fn fit(problem: &FitProblem, settings: &FitSettings, seed: u64) -> Result<FitResult> {
    if settings.grid.is_empty() || settings.restarts == 0 {
        return Err(Error::Config {
            path: "fit".into(),
            msg: "grid and restarts must be non-empty".into(),
        });
    }
    let g = settings.grid.len();
    let points: Vec<[f64; N_PARAMS]> = (0..g.pow(N_PARAMS as u32))
        .map(|mut idx| {
            let mut x = [0.0; N_PARAMS];
            for v in x.iter_mut() {
                *v = settings.grid[idx % g];
                idx /= g;
            }
            project(&mut x);
            x
        })
        .collect();
    let mut scored: Vec<([f64; N_PARAMS], f64)> = points
        .par_iter()
        .map(|x| Ok((*x, problem.chi2(ChainRates::from_array(*x))?)))
        .collect::<Result<_>>()?;
    let mut evals = scored.len();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut rng = rng_from_seed(seed);
    let starts: Vec<[f64; N_PARAMS]> = scored
        .iter()
        .take(settings.restarts)
        .map(|(x, _)| {
            let mut y = *x;
            for v in y.iter_mut() {
                *v += settings.initial_step * (rng.random::<f64>() - 0.5) * 0.5;
            }
            project(&mut y);
            y
        })
        .collect();
    let budget = settings.max_evals / (settings.restarts + 2);
    let runs: Vec<(([f64; N_PARAMS], f64, bool), usize)> = starts
        .par_iter()
        .map(|x| {
            let mut s = Search { problem, evals: 0 };
            let r = s.nelder_mead(*x, settings.initial_step, settings, budget)?;
            Ok((r, s.evals))
        })
        .collect::<Result<_>>()?;
    evals += runs.iter().map(|r| r.1).sum::<usize>();
    let ((mut best, mut fbest, mut converged), _) = runs
        .into_iter()
        .min_by(|a, b| a.0 .1.total_cmp(&b.0 .1))
        .expect("at least one restart");
    let mut search = Search { problem, evals: 0 };
    let mut step = settings.initial_step;
    while evals + search.evals < settings.max_evals {
        let left = settings.max_evals - evals - search.evals;
        let (x, fx, ok) = search.nelder_mead(best, step, settings, left)?;
        let improved = fx < fbest - settings.ftol;
        if fx < fbest {
            best = x;
            fbest = fx;
        }
        converged = ok;
        if !improved {
            break;
        }
        step = (step * 0.3).max(settings.xtol * 10.0);
    }
    evals += search.evals;
    Ok(FitResult {
        lambdas: ChainRates::from_array(best),
        chi2: fbest,
        iterations: evals,
        converged,
        settings_digest: digest_hex(&serde_json::to_vec(settings)?),
    })
}
