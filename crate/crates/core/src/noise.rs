//! Random-telegraph barrier noise and Monte Carlo ensembles.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::potential::{BarrierModulation, BarrierSchedule, StepFunction};
use crate::splitop::{evolve, PropagatorConfig};
use crate::tightbinding::{propagate, TBSchedule};
use crate::wave::WaveState;

/// Two-level telegraph process with one exponential dwell rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphModel {
    pub v_min: f64,
    pub v_max: f64,
    pub mean_dwell: f64,
    pub seed: u64,
    /// Start at `v_max` instead of `v_min`.
    #[serde(default)]
    pub start_high: bool,
}

impl TelegraphModel {
    pub fn new(v_min: f64, v_max: f64, mean_dwell: f64, seed: u64) -> Result<Self> {
        let m = Self {
            v_min,
            v_max,
            mean_dwell,
            seed,
            start_high: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// `v_min == v_max` is allowed and gives a noiseless model.
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_max >= self.v_min) {
            return Err(Error::invalid(format!(
                "telegraph levels need v_min <= v_max, got {} and {}",
                self.v_min, self.v_max
            )));
        }
        if !(self.mean_dwell > 0.0 && self.mean_dwell.is_finite()) {
            return Err(Error::invalid("mean dwell time must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_noiseless(&self) -> bool {
        self.v_min == self.v_max
    }
}

/// Level sequence on `[0, horizon]`.
pub fn telegraph_trajectory(model: &TelegraphModel, horizon: f64) -> Result<StepFunction> {
    model.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let (mut level, mut other) = if model.start_high {
        (model.v_max, model.v_min)
    } else {
        (model.v_min, model.v_max)
    };
    if model.is_noiseless() {
        return Ok(StepFunction::constant(level));
    }
    let initial = level;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let dwell = Exp::new(1.0 / model.mean_dwell).map_err(|e| Error::invalid(e.to_string()))?;
    let mut switches = Vec::new();
    let mut t = 0.0;
    loop {
        t += dwell.sample(&mut rng);
        if t >= horizon {
            break;
        }
        std::mem::swap(&mut level, &mut other);
        // A zero-length dwell would break strict ordering; merge it away.
        if switches.last().is_some_and(|&(s, _)| s == t) {
            switches.pop();
        } else {
            switches.push((t, level));
        }
    }
    StepFunction::new(initial, switches)
}

/// Seed of run `index` under `master`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    // splitmix64 finalizer over a golden-ratio stride.
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean and Student-t half-width at the given two-sided confidence.
pub fn student_ci(samples: &[f64], confidence: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(
            "a confidence interval needs at least two samples",
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!(
            "confidence {confidence} not in (0, 1)"
        )));
    }
    let nf = n as f64;
    // Offset by the first sample so identical samples give exactly zero spread.
    let s0 = samples[0];
    let mean = s0 + samples.iter().map(|s| s - s0).sum::<f64>() / nf;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    Ok((mean, t * (var / nf).sqrt()))
}

/// Dot probabilities of one realization at its record times.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySeries {
    pub times: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

/// A model whose evolution depends on one telegraph trajectory.
pub trait NoiseTarget: Sync {
    fn horizon(&self) -> f64;
    fn realize(&self, noise: &StepFunction) -> Result<ProbabilitySeries>;
}

/// Split-operator evolution with one barrier segment driven by the noise.
#[derive(Debug, Clone)]
pub struct SomNoiseTarget {
    pub schedule: BarrierSchedule,
    pub segment: usize,
    pub initial: WaveState,
    pub config: PropagatorConfig,
    pub dots: Vec<(f64, f64)>,
}

impl NoiseTarget for SomNoiseTarget {
    fn horizon(&self) -> f64 {
        self.config.dt * self.config.n_steps as f64
    }

    fn realize(&self, noise: &StepFunction) -> Result<ProbabilitySeries> {
        let mut mods: Vec<BarrierModulation> = self
            .schedule
            .modulations()
            .iter()
            .filter(|m| m.segment != self.segment)
            .cloned()
            .collect();
        mods.push(BarrierModulation {
            segment: self.segment,
            heights: noise.clone(),
        });
        let sched = BarrierSchedule::new(self.schedule.base().clone(), mods)?;
        let tr = evolve(&self.initial, &sched, &self.config, &self.dots)?;
        Ok(ProbabilitySeries {
            times: tr.times,
            probs: tr.dot_probs,
        })
    }
}

/// Tight-binding chain whose link hopping follows the noise level.
#[derive(Debug, Clone)]
pub struct TbNoiseTarget {
    pub schedule: TBSchedule,
    pub link: usize,
    /// `(level, hopping)` calibration points; each level maps to the nearest.
    pub hopping_of_level: Vec<(f64, f64)>,
    pub initial: Vec<Complex64>,
    pub horizon: f64,
    pub record_dt: f64,
}

impl TbNoiseTarget {
    fn hopping(&self, level: f64) -> Result<f64> {
        self.hopping_of_level
            .iter()
            .min_by(|a, b| (a.0 - level).abs().total_cmp(&(b.0 - level).abs()))
            .map(|&(_, t)| t)
            .ok_or_else(|| Error::invalid("no hopping calibration points"))
    }
}

impl NoiseTarget for TbNoiseTarget {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn realize(&self, noise: &StepFunction) -> Result<ProbabilitySeries> {
        let switches = noise
            .switches()
            .iter()
            .map(|&(t, v)| Ok((t, self.hopping(v)?)))
            .collect::<Result<Vec<_>>>()?;
        let f = StepFunction::new(self.hopping(noise.initial())?, switches)?;
        let sched = self.schedule.clone().with_link_function(self.link, f)?;
        let tr = propagate(&self.initial, &sched, self.horizon, self.record_dt)?;
        Ok(ProbabilitySeries {
            probs: tr.probabilities(),
            times: tr.times,
        })
    }
}

/// Ensemble mean and 95% Student-t band per time sample and dot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrace {
    pub times: Vec<f64>,
    pub mean_probs: Vec<Vec<f64>>,
    pub ci_half_width: Vec<Vec<f64>>,
    pub n_runs: usize,
    pub per_run_seeds: Vec<u64>,
}

impl EnsembleTrace {
    pub fn mean_series(&self, dot: usize) -> Vec<f64> {
        self.mean_probs.iter().map(|p| p[dot]).collect()
    }

    pub fn ci_series(&self, dot: usize) -> Vec<f64> {
        self.ci_half_width.iter().map(|p| p[dot]).collect()
    }

    pub fn n_dots(&self) -> usize {
        self.mean_probs.first().map_or(0, Vec::len)
    }
}

pub const ENSEMBLE_CONFIDENCE: f64 = 0.95;

/// Runs `n_runs` realizations in parallel, seeding run `i` with
/// `run_seed(model.seed, i)`, and reduces them in run order.
pub fn ensemble_run(
    target: &dyn NoiseTarget,
    model: &TelegraphModel,
    n_runs: usize,
) -> Result<EnsembleTrace> {
    if n_runs < 2 {
        return Err(Error::invalid("an ensemble needs at least two runs"));
    }
    model.validate()?;
    let horizon = target.horizon();
    let seeds: Vec<u64> = (0..n_runs).map(|i| run_seed(model.seed, i)).collect();
    let runs: Vec<ProbabilitySeries> = seeds
        .par_iter()
        .map(|&seed| {
            let noise = telegraph_trajectory(&model.with_seed(seed), horizon)?;
            target.realize(&noise)
        })
        .collect::<Result<Vec<_>>>()?;

    let times = runs[0].times.clone();
    if runs.iter().any(|r| r.times != times) {
        return Err(Error::Numeric(
            "realizations recorded different times".into(),
        ));
    }
    let n_dots = runs[0].probs.first().map_or(0, Vec::len);
    let mut mean_probs = Vec::with_capacity(times.len());
    let mut ci = Vec::with_capacity(times.len());
    let mut column = vec![0.0; n_runs];
    for i in 0..times.len() {
        let mut m = Vec::with_capacity(n_dots);
        let mut h = Vec::with_capacity(n_dots);
        for d in 0..n_dots {
            for (c, r) in column.iter_mut().zip(&runs) {
                *c = r.probs[i][d];
            }
            let (mean, half) = student_ci(&column, ENSEMBLE_CONFIDENCE)?;
            m.push(mean.clamp(0.0, 1.0));
            h.push(half);
        }
        mean_probs.push(m);
        ci.push(h);
    }
    Ok(EnsembleTrace {
        times,
        mean_probs,
        ci_half_width: ci,
        n_runs,
        per_run_seeds: seeds,
    })
}

/// Oscillation amplitudes of one dot's ensemble mean in the first and last
/// quarter of the record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCheck {
    pub first_amplitude: f64,
    pub last_amplitude: f64,
    /// First-quarter amplitude of the band's inner edges.
    pub first_lower: f64,
    /// Last-quarter amplitude of the band's outer edges.
    pub last_upper: f64,
}

impl DecayCheck {
    /// The decay holds even at the unfavourable edges of the 95% band.
    pub fn decayed(&self) -> bool {
        self.first_lower > self.last_upper
    }
}

pub fn decay_check(trace: &EnsembleTrace, dot: usize) -> Result<DecayCheck> {
    let n = trace.times.len();
    if n < 8 {
        return Err(Error::invalid("too few samples to compare quarters"));
    }
    if dot >= trace.n_dots() {
        return Err(Error::invalid(format!("no dot {dot}")));
    }
    let mean = trace.mean_series(dot);
    let ci = trace.ci_series(dot);
    let q = n / 4;
    let span = |r: std::ops::Range<usize>, hi: f64, lo: f64| -> f64 {
        let max = r
            .clone()
            .map(|i| mean[i] + hi * ci[i])
            .fold(f64::MIN, f64::max);
        let min = r.map(|i| mean[i] + lo * ci[i]).fold(f64::MAX, f64::min);
        0.5 * (max - min).max(0.0)
    };
    Ok(DecayCheck {
        first_amplitude: span(0..q, 0.0, 0.0),
        last_amplitude: span(n - q..n, 0.0, 0.0),
        first_lower: span(0..q, -1.0, 1.0),
        last_upper: span(n - q..n, 1.0, -1.0),
    })
}

/// `t,mean_p1..pN,ci_p1..pN` rows.
pub fn write_ensemble_csv(out: &mut impl Write, trace: &EnsembleTrace) -> std::io::Result<()> {
    let n = trace.n_dots();
    write!(out, "t")?;
    for k in 1..=n {
        write!(out, ",mean_p{k}")?;
    }
    for k in 1..=n {
        write!(out, ",ci_p{k}")?;
    }
    writeln!(out)?;
    for ((t, m), c) in trace
        .times
        .iter()
        .zip(&trace.mean_probs)
        .zip(&trace.ci_half_width)
    {
        write!(out, "{t}")?;
        for v in m.iter().chain(c) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_two_points() {
        let (m, h) = student_ci(&[0.0, 1.0], 0.95).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 6.353).abs() < 1e-3, "{h}");
    }

    #[test]
    fn ci_of_identical_samples_is_zero() {
        let (m, h) = student_ci(&[0.3; 10], 0.95).unwrap();
        assert!((m - 0.3).abs() < 1e-15);
        assert_eq!(h, 0.0);
        assert!(student_ci(&[1.0], 0.95).is_err());
    }

    #[test]
    fn equal_levels_give_constant() {
        let m = TelegraphModel::new(4.0, 4.0, 0.1, 7).unwrap();
        let f = telegraph_trajectory(&m, 100.0).unwrap();
        assert!(f.switches().is_empty());
        assert_eq!(f.value(50.0), 4.0);
    }

    #[test]
    fn trajectory_alternates_from_low() {
        let m = TelegraphModel::new(4.0, 5.0, 1.0, 3).unwrap();
        let f = telegraph_trajectory(&m, 50.0).unwrap();
        assert_eq!(f.initial(), 4.0);
        let mut expect = 5.0;
        for &(t, v) in f.switches() {
            assert!(t > 0.0 && t < 50.0);
            assert_eq!(v, expect);
            expect = if expect == 5.0 { 4.0 } else { 5.0 };
        }
        let high = telegraph_trajectory(
            &TelegraphModel {
                start_high: true,
                ..m
            },
            50.0,
        )
        .unwrap();
        assert_eq!(high.initial(), 5.0);
    }

    #[test]
    fn bad_models_rejected() {
        assert!(TelegraphModel::new(5.0, 4.0, 1.0, 0).is_err());
        assert!(TelegraphModel::new(4.0, 5.0, 0.0, 0).is_err());
        let m = TelegraphModel::new(4.0, 5.0, 1.0, 0).unwrap();
        assert!(telegraph_trajectory(&m, 0.0).is_err());
    }

    #[test]
    fn run_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| run_seed(42, i)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 100);
        assert_ne!(run_seed(1, 0), run_seed(2, 0));
    }
}
