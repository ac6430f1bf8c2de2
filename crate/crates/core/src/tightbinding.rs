//! Nearest-neighbour tight-binding model of a dot register under hopping pulses.
//!
//! Amplitudes obey `i/(2π)·dC/dτ = H(τ)·C` with `H` tridiagonal, zero on the
//! diagonal and `-t_h` on the off-diagonals.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::StepFunction;

/// A hopping pulse on one link: `t_high` on `[t_start, t_start + width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Zero-based sites `(j, j + 1)`.
    pub link: (usize, usize),
    pub t_low: f64,
    pub t_high: f64,
    pub t_start: f64,
    pub width: f64,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.t_start + self.width
    }

    fn validate(&self, n_sites: usize) -> Result<()> {
        let (j, k) = self.link;
        if j.abs_diff(k) != 1 || j.max(k) >= n_sites {
            return Err(Error::invalid(format!(
                "link ({j}, {k}) is not a nearest-neighbour pair of {n_sites} sites"
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite() && self.t_start.is_finite()) {
            return Err(Error::invalid(format!(
                "pulse on {:?} needs a positive width",
                self.link
            )));
        }
        if !(self.t_low >= 0.0 && self.t_high >= self.t_low && self.t_high.is_finite()) {
            return Err(Error::invalid(format!(
                "pulse on {:?} needs 0 <= t_low <= t_high",
                self.link
            )));
        }
        Ok(())
    }

    fn link_index(&self) -> usize {
        self.link.0.min(self.link.1)
    }
}

/// Hopping on every link of a chain as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct TBSchedule {
    n_sites: usize,
    pulses: Vec<Pulse>,
    links: Vec<StepFunction>,
}

impl TBSchedule {
    /// `default_hopping[j]` applies to link `(j, j+1)` when it carries no
    /// pulse. Pulsed links sit at the `t_low` of the nearest pulse.
    pub fn new(n_sites: usize, default_hopping: &[f64], pulses: Vec<Pulse>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("at least one site is needed"));
        }
        if default_hopping.len() != n_sites - 1 {
            return Err(Error::invalid(format!(
                "{} sites need {} link hoppings, got {}",
                n_sites,
                n_sites - 1,
                default_hopping.len()
            )));
        }
        if default_hopping.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("hopping values must be finite"));
        }
        for p in &pulses {
            p.validate(n_sites)?;
        }
        let mut links = Vec::with_capacity(n_sites - 1);
        for (j, &default) in default_hopping.iter().enumerate() {
            let mut on_link: Vec<&Pulse> = pulses.iter().filter(|p| p.link_index() == j).collect();
            on_link.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
            for w in on_link.windows(2) {
                if w[1].t_start < w[0].end() {
                    return Err(Error::invalid(format!(
                        "pulses on link ({}, {}) overlap at t={}",
                        j,
                        j + 1,
                        w[1].t_start
                    )));
                }
            }
            let Some(first) = on_link.first() else {
                links.push(StepFunction::constant(default));
                continue;
            };
            let mut switches: Vec<(f64, f64)> = Vec::new();
            for p in &on_link {
                match switches.last_mut() {
                    Some(last) if last.0 == p.t_start => last.1 = p.t_high,
                    _ => switches.push((p.t_start, p.t_high)),
                }
                switches.push((p.end(), p.t_low));
            }
            links.push(StepFunction::new(first.t_low, switches)?);
        }
        Ok(Self {
            n_sites,
            pulses,
            links,
        })
    }

    /// Chain with a constant hopping on every link.
    pub fn constant(n_sites: usize, hopping: f64) -> Result<Self> {
        Self::new(
            n_sites,
            &vec![hopping; n_sites.saturating_sub(1)],
            Vec::new(),
        )
    }

    /// Replaces the hopping of link `(j, j+1)` by an arbitrary step function.
    pub fn with_link_function(mut self, j: usize, f: StepFunction) -> Result<Self> {
        if j + 1 >= self.n_sites {
            return Err(Error::invalid(format!("no link ({j}, {})", j + 1)));
        }
        self.pulses.retain(|p| p.link_index() != j);
        self.links[j] = f;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn link_function(&self, j: usize) -> &StepFunction {
        &self.links[j]
    }

    pub fn switch_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.links.iter().flat_map(|f| f.switch_times()).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    fn hoppings(&self, t: f64) -> Vec<f64> {
        self.links.iter().map(|f| f.value(t)).collect()
    }
}

/// Hopping on `link` at time `t`; pulse ends count as inside the pulse.
pub fn hopping_at(schedule: &TBSchedule, link: (usize, usize), t: f64) -> Result<f64> {
    let (j, k) = link;
    if j.abs_diff(k) != 1 || j.max(k) >= schedule.n_sites {
        return Err(Error::invalid(format!("no link ({j}, {k})")));
    }
    let idx = j.min(k);
    if let Some(p) = schedule
        .pulses
        .iter()
        .find(|p| p.link_index() == idx && p.t_start <= t && t <= p.end())
    {
        return Ok(p.t_high);
    }
    Ok(schedule.links[idx].value(t))
}

fn chain_hamiltonian(hoppings: &[f64]) -> DMatrix<f64> {
    let n = hoppings.len() + 1;
    let mut h = DMatrix::zeros(n, n);
    for (j, &t) in hoppings.iter().enumerate() {
        h[(j, j + 1)] = -t;
        h[(j + 1, j)] = -t;
    }
    h
}

/// Tridiagonal Hamiltonian at time `t`.
pub fn hamiltonian_at(schedule: &TBSchedule, t: f64) -> DMatrix<f64> {
    chain_hamiltonian(&schedule.hoppings(t))
}

/// Amplitudes at the recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrace {
    pub times: Vec<f64>,
    /// `amplitudes[i][k]`: amplitude of site `k` at `times[i]`.
    pub amplitudes: Vec<Vec<Complex64>>,
}

impl AmplitudeTrace {
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.amplitudes
            .iter()
            .map(|c| c.iter().map(|a| a.norm_sqr()).collect())
            .collect()
    }

    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c[site].norm_sqr()).collect()
    }

    pub fn final_amplitudes(&self) -> &[Complex64] {
        self.amplitudes.last().expect("at least the initial record")
    }
}

/// Exact propagator factors for one constant Hamiltonian.
struct Eigen {
    hoppings: Vec<f64>,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Eigen {
    fn new(hoppings: Vec<f64>) -> Self {
        let eig = SymmetricEigen::new(chain_hamiltonian(&hoppings));
        Self {
            hoppings,
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i·2π·H·dt)·c`.
    fn apply(&self, c: &[Complex64], dt: f64) -> Vec<Complex64> {
        let n = c.len();
        let v = &self.vectors;
        let proj: Vec<Complex64> = (0..n)
            .map(|a| {
                let s: Complex64 = (0..n).map(|k| c[k] * v[(k, a)]).sum();
                s * Complex64::from_polar(1.0, -2.0 * PI * self.values[a] * dt)
            })
            .collect();
        (0..n)
            .map(|k| (0..n).map(|a| proj[a] * v[(k, a)]).sum())
            .collect()
    }
}

/// Exact piecewise propagation from `t = 0` to `horizon`, recording every
/// `record_dt` and at the horizon.
pub fn propagate(
    c0: &[Complex64],
    schedule: &TBSchedule,
    horizon: f64,
    record_dt: f64,
) -> Result<AmplitudeTrace> {
    if c0.len() != schedule.n_sites {
        return Err(Error::invalid(format!(
            "{} amplitudes for {} sites",
            c0.len(),
            schedule.n_sites
        )));
    }
    let norm: f64 = c0.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "initial amplitudes have norm {norm}"
        )));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be non-negative"));
    }
    if !(record_dt > 0.0) {
        return Err(Error::invalid("record interval must be positive"));
    }
    let n_records = (horizon / record_dt + 1e-9).floor() as usize;
    let mut records: Vec<f64> = (0..=n_records).map(|i| i as f64 * record_dt).collect();
    if horizon - records[n_records] > 1e-12 * horizon.max(1.0) {
        records.push(horizon);
    }
    let switches: Vec<f64> = schedule
        .switch_times()
        .into_iter()
        .filter(|&t| t > 0.0 && t < horizon)
        .collect();

    let mut cache: Vec<Eigen> = Vec::new();
    let mut c = c0.to_vec();
    let mut trace = AmplitudeTrace {
        times: vec![0.0],
        amplitudes: vec![c.clone()],
    };
    let mut t = 0.0;
    let mut si = 0;
    for &target in &records[1..] {
        while t < target {
            while si < switches.len() && switches[si] <= t {
                si += 1;
            }
            let next = switches
                .get(si)
                .copied()
                .filter(|&s| s < target)
                .unwrap_or(target);
            let hop = schedule.hoppings(0.5 * (t + next));
            let idx = match cache.iter().position(|e| e.hoppings == hop) {
                Some(i) => i,
                None => {
                    cache.push(Eigen::new(hop));
                    cache.len() - 1
                }
            };
            c = cache[idx].apply(&c, next - t);
            t = next;
        }
        trace.times.push(target);
        trace.amplitudes.push(c.clone());
    }
    Ok(trace)
}

/// Rabi period `1/(2·t_h)` in `t0`.
pub fn rabi_period(t_h: f64) -> Result<f64> {
    if !(t_h > 0.0 && t_h.is_finite()) {
        return Err(Error::invalid(format!("hopping {t_h} must be positive")));
    }
    Ok(0.5 / t_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateKind {
    /// Full transfer to the neighbour, `T0/2 + k·T0`.
    Transport,
    /// Equal split between the pair, `T0/4 + k·T0`.
    HalfSplit,
}

pub fn gate_pulse_width(kind: GateKind, period: f64, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::invalid(format!(
            "pulse repetition k = {k} must be >= 0"
        )));
    }
    let base = match kind {
        GateKind::Transport => 0.5,
        GateKind::HalfSplit => 0.25,
    };
    Ok((base + k as f64) * period)
}

/// `t,re_c1,im_c1,...` rows.
pub fn write_amplitudes_csv(out: &mut impl Write, trace: &AmplitudeTrace) -> std::io::Result<()> {
    let n = trace.amplitudes.first().map_or(0, Vec::len);
    write!(out, "t")?;
    for k in 1..=n {
        write!(out, ",re_c{k},im_c{k}")?;
    }
    writeln!(out)?;
    for (t, c) in trace.times.iter().zip(&trace.amplitudes) {
        write!(out, "{t}")?;
        for a in c {
            write!(out, ",{},{}", a.re, a.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `t,p1,...` rows.
pub fn write_probabilities_csv(
    out: &mut impl Write,
    trace: &AmplitudeTrace,
) -> std::io::Result<()> {
    let n = trace.amplitudes.first().map_or(0, Vec::len);
    write!(out, "t")?;
    for k in 1..=n {
        write!(out, ",p{k}")?;
    }
    writeln!(out)?;
    for (t, p) in trace.times.iter().zip(trace.probabilities()) {
        write!(out, "{t}")?;
        for v in p {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
