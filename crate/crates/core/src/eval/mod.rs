//! Set-level evaluation of generated fields: minimum matching distance,
//! coverage, and per-sample timing.

use std::fmt;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::diffusion::{ancestral_sample, NoisePredictor, NoiseSchedule};
use crate::spectral::SpectralOperators;
use crate::{Error, Result};

/// Mass-weighted RMS distance `sqrt(Σ Ω_i ‖a_i - b_i‖² / Σ Ω_i)`.
pub fn field_distance(a: ArrayView2<f64>, b: ArrayView2<f64>, mass: &[f64]) -> Result<f64> {
    if a.dim() != b.dim() || a.nrows() != mass.len() {
        return Err(Error::Shape(format!(
            "fields {:?} and {:?} with {} mass entries are not on the same mesh",
            a.dim(),
            b.dim(),
            mass.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((ra, rb), &m) in a.rows().into_iter().zip(b.rows()).zip(mass) {
        let d2: f64 = ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
        num += m * d2;
        den += m;
    }
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("total mass must be positive".into()));
    }
    Ok((num / den).sqrt())
}

/// `rows = reference`, `cols = generated`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDistanceMatrix(pub Array2<f64>);

pub fn distance_matrix(
    reference: &[ArrayView2<f64>],
    generated: &[ArrayView2<f64>],
    mass: &[f64],
) -> Result<FieldDistanceMatrix> {
    let (r, g) = (reference.len(), generated.len());
    let flat: Vec<f64> = (0..r * g)
        .into_par_iter()
        .map(|idx| field_distance(reference[idx / g], generated[idx % g], mass))
        .collect::<Result<_>>()?;
    Ok(FieldDistanceMatrix(
        Array2::from_shape_vec((r, g), flat).expect("r × g entries"),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdCov {
    pub mmd: f64,
    pub cov_percent: f64,
}

impl FieldDistanceMatrix {
    /// MMD: mean over reference rows of the row minimum. COV: percentage of
    /// reference rows that are the nearest reference of at least one
    /// generated column (ties resolve to the lowest index).
    pub fn mmd_cov(&self) -> Result<MmdCov> {
        let d = &self.0;
        let (r, g) = d.dim();
        if r == 0 || g == 0 {
            return Err(Error::InvalidArgument("MMD/COV need non-empty reference and generated sets".into()));
        }
        let mmd = d
            .rows()
            .into_iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / r as f64;
        let mut matched = vec![false; r];
        for col in d.columns() {
            let mut best = 0;
            for i in 1..r {
                if col[i] < col[best] {
                    best = i;
                }
            }
            matched[best] = true;
        }
        let cov_percent = 100.0 * matched.iter().filter(|&&m| m).count() as f64 / r as f64;
        Ok(MmdCov { mmd, cov_percent })
    }
}

pub fn compute_mmd_cov(
    reference: &[ArrayView2<f64>],
    generated: &[ArrayView2<f64>],
    mass: &[f64],
) -> Result<MmdCov> {
    if reference.is_empty() || generated.is_empty() {
        return Err(Error::InvalidArgument("MMD/COV need non-empty reference and generated sets".into()));
    }
    if reference.len() != generated.len() {
        log::warn!(
            "{} reference vs {} generated samples; the usual protocol uses equal counts",
            reference.len(),
            generated.len()
        );
    }
    distance_matrix(reference, generated, mass)?.mmd_cov()
}

/// Median of the measurements.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Wall-clock seconds of `f` per call: one excluded warm-up call, then the
/// median over `repeats` timed calls.
pub fn time_median(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("timing needs at least one repeat".into()));
    }
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
    }
    Ok(median(&times))
}

/// Median seconds to draw one full sample (all reverse steps), excluding
/// operator precomputation and a warm-up run.
pub fn time_inference(
    predictor: &dyn NoisePredictor,
    ops: &SpectralOperators,
    sched: &NoiseSchedule,
    channels: usize,
    repeats: usize,
) -> Result<f64> {
    let mut seed = 0;
    time_median(repeats, || {
        seed += 1;
        ancestral_sample(predictor, ops, sched, channels, seed).map(|_| ())
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mmd: f64,
    pub cov_percent: f64,
    pub n_reference: usize,
    pub n_generated: usize,
    pub median_seconds_per_sample: Option<f64>,
}

impl EvalReport {
    pub fn csv(&self) -> String {
        format!(
            "mmd,cov_percent,n_reference,n_generated,median_seconds_per_sample\n{},{},{},{},{}\n",
            self.mmd,
            self.cov_percent,
            self.n_reference,
            self.n_generated,
            self.median_seconds_per_sample.map(|t| t.to_string()).unwrap_or_default()
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mmd: {:.6}", self.mmd)?;
        writeln!(f, "cov_percent: {:.2}", self.cov_percent)?;
        writeln!(f, "n_reference: {}", self.n_reference)?;
        writeln!(f, "n_generated: {}", self.n_generated)?;
        match self.median_seconds_per_sample {
            Some(t) => writeln!(f, "median_seconds_per_sample: {t:.6}"),
            None => writeln!(f, "median_seconds_per_sample: n/a"),
        }
    }
}
