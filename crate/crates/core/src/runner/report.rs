use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    crosstalk_twirl_average, crosstalk_twirl_operational, neighbor_weights, pauli_twirl_average,
    pauli_twirl_operational, random_cptp, Channel, PauliChannel,
};
use crate::error::Result;
use crate::mitigation::ExperimentSeries;
use crate::rng::{derive_labeled, rng_from_seed};
use crate::sim::{calibration_confusion, multinomial, unfold, CalibrationMode, ConfusionMatrix, UNFOLD_ITERATIONS};

/// Worst-case deviations over a batch of random three-qubit channels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwirlCheck {
    /// Largest off-diagonal PTM entry of the operational twirl.
    pub off_diagonal: f64,
    /// Largest PTM difference between the operational twirl and its closed form.
    pub closed_form: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlReport {
    pub n_channels: usize,
    pub seed: u64,
    pub pauli: TwirlCheck,
    pub crosstalk: TwirlCheck,
    /// Largest spread among the X, Y, Z weights of a neighbour marginal after crosstalk twirling.
    pub neighbor_spread: f64,
    /// Largest difference between the active-pair marginals of the crosstalk and Pauli twirls.
    pub active_pair: f64,
}

impl TwirlReport {
    pub fn passes(&self, tol: f64) -> bool {
        [
            self.pauli.off_diagonal,
            self.pauli.closed_form,
            self.crosstalk.off_diagonal,
            self.crosstalk.closed_form,
            self.neighbor_spread,
            self.active_pair,
        ]
        .iter()
        .all(|v| *v < tol)
    }
}

fn off_diagonal(ch: &Channel) -> f64 {
    let r = ch.ptm();
    let mut worst: f64 = 0.0;
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            if i != j {
                worst = worst.max(r[(i, j)].abs());
            }
        }
    }
    worst
}

fn max_abs_diff(a: &PauliChannel, b: &PauliChannel) -> f64 {
    a.probabilities()
        .iter()
        .zip(b.probabilities())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Checks both twirls on `n_channels` random CPTP maps over `[control, target, neighbour]`.
pub fn twirl_check(n_channels: usize, seed: u64) -> Result<TwirlReport> {
    let mut report = TwirlReport {
        n_channels,
        seed,
        pauli: TwirlCheck::default(),
        crosstalk: TwirlCheck::default(),
        neighbor_spread: 0.0,
        active_pair: 0.0,
    };
    for i in 0..n_channels {
        let mut rng = rng_from_seed(derive_labeled(seed, "twirl-check", i as u64));
        let ch = random_cptp(3, 4, &mut rng);

        let p_avg = pauli_twirl_average(&ch);
        let p_op = Channel::Kraus(pauli_twirl_operational(&ch));
        report.pauli.off_diagonal = report.pauli.off_diagonal.max(off_diagonal(&p_op));
        let d = (p_op.ptm() - Channel::Pauli(p_avg.clone()).ptm()).amax();
        report.pauli.closed_form = report.pauli.closed_form.max(d);

        let x_avg = crosstalk_twirl_average(&ch)?;
        let x_op = Channel::Kraus(crosstalk_twirl_operational(&ch)?);
        report.crosstalk.off_diagonal = report.crosstalk.off_diagonal.max(off_diagonal(&x_op));
        let d = (x_op.ptm() - Channel::Pauli(x_avg.clone()).ptm()).amax();
        report.crosstalk.closed_form = report.crosstalk.closed_form.max(d);

        let w = neighbor_weights(&x_avg, 2);
        let hi = w[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = w[1..].iter().cloned().fold(f64::INFINITY, f64::min);
        report.neighbor_spread = report.neighbor_spread.max(hi - lo);

        let d = max_abs_diff(&x_avg.marginal(&[0, 1]), &p_avg.marginal(&[0, 1]));
        report.active_pair = report.active_pair.max(d);
    }
    Ok(report)
}

/// `|(noisy − reference) / noisy|`, or `None` when the noisy value is too
/// close to zero for the ratio to mean anything.
pub fn relative_error(noisy: f64, reference: f64) -> Option<f64> {
    (noisy.abs() >= 1e-12).then(|| ((noisy - reference) / noisy).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantError {
    pub mean_relative_error: f64,
    pub cells: usize,
    pub skipped: usize,
}

/// Mean relative error against the noiseless Trotter column, keyed by
/// variant: `raw` plus one entry per RC mode for the mitigated column.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variants: BTreeMap<String, VariantError>,
}

#[derive(Default)]
struct Acc {
    sum: f64,
    cells: usize,
    skipped: usize,
}

impl Acc {
    fn push(&mut self, noisy: f64, reference: f64) {
        match relative_error(noisy, reference) {
            Some(e) => {
                self.sum += e;
                self.cells += 1;
            }
            None => self.skipped += 1,
        }
    }
}

pub fn summarize_series<'a>(series: impl IntoIterator<Item = &'a ExperimentSeries>) -> Summary {
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
    for s in series {
        for r in &s.rows {
            acc.entry("raw".into()).or_default().push(r.raw, r.trotter_ideal);
            acc.entry(s.meta.rc_mode.clone())
                .or_default()
                .push(r.mitigated, r.trotter_ideal);
        }
    }
    Summary {
        variants: acc
            .into_iter()
            .map(|(k, a)| {
                let mean = if a.cells > 0 { a.sum / a.cells as f64 } else { f64::NAN };
                (
                    k,
                    VariantError {
                        mean_relative_error: mean,
                        cells: a.cells,
                        skipped: a.skipped,
                    },
                )
            })
            .collect(),
    }
}

/// Reads series JSON files and summarizes them.
pub fn summarize(paths: &[impl AsRef<Path>]) -> Result<Summary> {
    let series = paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect::<Result<Vec<ExperimentSeries>>>()?;
    Ok(summarize_series(&series))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldDemo {
    pub n_bits: usize,
    pub flip: f64,
    pub shots: u64,
    pub trials: usize,
    /// Mean total-variation distance to the true distribution.
    pub raw_tv: f64,
    pub unfolded_tv: f64,
}

impl UnfoldDemo {
    pub fn improvement(&self) -> f64 {
        self.raw_tv / self.unfolded_tv
    }
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Monte-Carlo check of readout unfolding. Trial `t` takes the true
/// distribution `truths[t % len]`, calibrates a full confusion matrix with
/// `shots` per preparation, samples `shots` outcomes through symmetric
/// flips and compares raw and unfolded frequencies against the truth.
pub fn unfold_demo(truths: &[Vec<f64>], flip: f64, shots: u64, trials: usize, seed: u64) -> Result<UnfoldDemo> {
    let dim = truths.first().map_or(1, Vec::len);
    if truths.is_empty() || !dim.is_power_of_two() || truths.iter().any(|t| t.len() != dim) {
        return Err(crate::Error::Dimension(
            "unfold demo needs distributions of one power-of-two length".into(),
        ));
    }
    let n_bits = dim.trailing_zeros() as usize;
    let truth = ConfusionMatrix::symmetric(n_bits, flip)?;
    let (raw_tv, unfolded_tv) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_labeled(seed, "unfold-demo", t as u64));
            let p = &truths[t % truths.len()];
            let cal = calibration_confusion(&truth, CalibrationMode::Full, shots, &mut rng)?;
            let counts = multinomial(&truth.apply(p), shots, &mut rng);
            let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / shots as f64).collect();
            let est = unfold(&freq, &cal.matrix, UNFOLD_ITERATIONS, None)?;
            Ok((total_variation(&freq, p), total_variation(&est, p)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = trials.max(1) as f64;
    Ok(UnfoldDemo {
        n_bits,
        flip,
        shots,
        trials,
        raw_tv: raw_tv / n,
        unfolded_tv: unfolded_tv / n,
    })
}
