//! Split-operator propagation of the time-dependent Schrödinger equation
//! `i/(2π)·∂ψ/∂τ = [-∂²/∂ξ² + v(ξ, τ)]ψ` on a hard-walled grid.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{BarrierSchedule, EmbeddedPotential, Potential, StepFunction};
use crate::spectral::SineSpectrum;
use crate::wave::{dot_probabilities, energy_expectation, norm, Grid, WaveState};

/// Default time step in `t0`.
pub const DEFAULT_DT: f64 = 1e-4;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 512;
/// Default relative energy change that ends an imaginary-time search.
pub const DEFAULT_GROUND_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    RealTime,
    ImaginaryTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub record_stride: usize,
    pub mode: TimeMode,
    /// Keep `|ψ|²` at every recorded time.
    #[serde(default)]
    pub snapshots: bool,
}

impl PropagatorConfig {
    pub fn new(dt: f64, n_steps: usize, record_stride: usize) -> Result<Self> {
        let c = Self {
            dt,
            n_steps,
            record_stride,
            mode: TimeMode::RealTime,
            snapshots: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn imaginary(mut self) -> Self {
        self.mode = TimeMode::ImaginaryTime;
        self
    }

    pub fn with_snapshots(mut self) -> Self {
        self.snapshots = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!(
                "time step {} must be positive",
                self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record stride must be at least 1"));
        }
        Ok(())
    }
}

/// Recorded observables of one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    /// `dot_probs[i][d]`: probability in dot `d` at `times[i]`.
    pub dot_probs: Vec<Vec<f64>>,
    pub norm_series: Vec<f64>,
    pub snapshots: Option<Vec<Vec<f64>>>,
    pub final_state: WaveState,
}

impl EvolutionTrace {
    /// Probability series of one dot.
    pub fn dot_series(&self, dot: usize) -> Vec<f64> {
        self.dot_probs.iter().map(|p| p[dot]).collect()
    }
}

struct GridModulation {
    heights: StepFunction,
    base_height: f64,
    weight: Vec<f64>,
}

struct PhaseEntry {
    key: Vec<f64>,
    dt: f64,
    mode: TimeMode,
    half: Vec<Complex64>,
}

/// Reusable split-operator stepper for one grid and one potential schedule.
pub struct Propagator {
    grid: Grid,
    spectrum: SineSpectrum,
    k2: Vec<f64>,
    base: Vec<f64>,
    wall: Vec<bool>,
    modulations: Vec<GridModulation>,
    switch_times: Vec<f64>,
    potential_cache: Vec<PhaseEntry>,
    kinetic_cache: Option<(f64, TimeMode, Vec<Complex64>)>,
}

fn phase(mode: TimeMode, angle: f64) -> Complex64 {
    match mode {
        TimeMode::RealTime => Complex64::from_polar(1.0, -angle),
        TimeMode::ImaginaryTime => Complex64::new((-angle).exp(), 0.0),
    }
}

impl Propagator {
    /// Samples a static potential on `grid`. Non-finite values act as walls.
    pub fn fixed(potential: &dyn Potential, grid: Grid) -> Result<Self> {
        let values: Vec<f64> = grid.xs().map(|x| potential.value(x)).collect();
        Self::build(grid, values, Vec::new())
    }

    pub fn new(schedule: &BarrierSchedule, grid: Grid) -> Result<Self> {
        let base_pot = schedule.base();
        let l = base_pot.length();
        let tol = 1e-9 * l;
        if grid.offset < -tol || grid.end() > l + tol {
            return Err(Error::invalid(format!(
                "grid [{}, {}] extends past the walls at 0 and {l}",
                grid.offset,
                grid.end()
            )));
        }
        let values: Vec<f64> = grid.xs().map(|x| base_pot.value(x.clamp(0.0, l))).collect();
        let modulations = schedule
            .modulations()
            .iter()
            .map(|m| GridModulation {
                heights: m.heights.clone(),
                base_height: schedule.base_height(m.segment),
                weight: grid
                    .xs()
                    .map(|x| schedule.segment_weight(m.segment, x.clamp(0.0, l)))
                    .collect(),
            })
            .collect();
        Self::build(grid, values, modulations)
    }

    fn build(grid: Grid, values: Vec<f64>, modulations: Vec<GridModulation>) -> Result<Self> {
        if !grid.n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size {} is not a power of 2",
                grid.n_points
            )));
        }
        let wall: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
        let base = values
            .iter()
            .map(|&v| if v.is_finite() { v } else { 0.0 })
            .collect();
        let mut switch_times: Vec<f64> = modulations
            .iter()
            .flat_map(|m: &GridModulation| m.heights.switch_times().collect::<Vec<_>>())
            .collect();
        switch_times.sort_by(f64::total_cmp);
        switch_times.dedup();
        let k2 = SineSpectrum::wavenumbers(grid.n_points, grid.length)
            .into_iter()
            .map(|k| k * k)
            .collect();
        Ok(Self {
            spectrum: SineSpectrum::new(grid.n_points),
            grid,
            k2,
            base,
            wall,
            modulations,
            switch_times,
            potential_cache: Vec::new(),
            kinetic_cache: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Potential on the grid at time `t`.
    pub fn potential(&self, t: f64) -> Vec<f64> {
        let key = self.heights(t);
        self.potential_for(&key)
    }

    fn heights(&self, t: f64) -> Vec<f64> {
        self.modulations
            .iter()
            .map(|m| m.heights.value(t))
            .collect()
    }

    fn potential_for(&self, key: &[f64]) -> Vec<f64> {
        let mut v = self.base.clone();
        for (m, &h) in self.modulations.iter().zip(key) {
            let dh = h - m.base_height;
            if dh != 0.0 {
                for (vi, w) in v.iter_mut().zip(&m.weight) {
                    *vi += dh * w;
                }
            }
        }
        v
    }

    fn half_potential_phase(&mut self, t_mid: f64, dt: f64, mode: TimeMode) -> usize {
        let key = self.heights(t_mid);
        if let Some(i) = self
            .potential_cache
            .iter()
            .position(|e| e.key == key && e.dt == dt && e.mode == mode)
        {
            return i;
        }
        let v = self.potential_for(&key);
        let half = v
            .iter()
            .zip(&self.wall)
            .map(|(&vi, &w)| {
                if w {
                    Complex64::new(0.0, 0.0)
                } else {
                    phase(mode, PI * vi * dt)
                }
            })
            .collect();
        if self.potential_cache.len() >= 4 {
            self.potential_cache.remove(0);
        }
        self.potential_cache.push(PhaseEntry {
            key,
            dt,
            mode,
            half,
        });
        self.potential_cache.len() - 1
    }

    fn strang(&mut self, psi: &mut [Complex64], t_mid: f64, dt: f64, mode: TimeMode) {
        let idx = self.half_potential_phase(t_mid, dt, mode);
        let cached = matches!(&self.kinetic_cache, Some((d, m, _)) if *d == dt && *m == mode);
        if !cached {
            let kin = self
                .k2
                .iter()
                .map(|&k2| phase(mode, 2.0 * PI * k2 * dt))
                .collect();
            self.kinetic_cache = Some((dt, mode, kin));
        }
        let half = &self.potential_cache[idx].half;
        psi.iter_mut().zip(half).for_each(|(a, p)| *a *= p);
        self.spectrum.forward(psi);
        let kin = &self.kinetic_cache.as_ref().expect("set above").2;
        self.spectrum
            .buf
            .iter_mut()
            .zip(kin)
            .for_each(|(a, p)| *a *= p);
        self.spectrum.inverse(psi);
        let half = &self.potential_cache[idx].half;
        psi.iter_mut().zip(half).for_each(|(a, p)| *a *= p);
    }

    /// Advances `psi` from `t` to `t + dt`, splitting the step at any barrier
    /// switch inside it. A negative `dt` runs backwards.
    pub fn step(&mut self, psi: &mut [Complex64], t: f64, dt: f64, mode: TimeMode) {
        let (lo, hi) = if dt >= 0.0 { (t, t + dt) } else { (t + dt, t) };
        let first = self.switch_times.partition_point(|&s| s <= lo);
        let inside: Vec<f64> = self.switch_times[first..]
            .iter()
            .copied()
            .take_while(|&s| s < hi)
            .collect();
        if inside.is_empty() {
            self.strang(psi, t + 0.5 * dt, dt, mode);
            return;
        }
        let mut cuts = vec![t];
        if dt >= 0.0 {
            cuts.extend(inside);
        } else {
            cuts.extend(inside.into_iter().rev());
        }
        cuts.push(t + dt);
        for w in cuts.windows(2) {
            let sub = w[1] - w[0];
            if sub != 0.0 {
                self.strang(psi, 0.5 * (w[0] + w[1]), sub, mode);
            }
        }
    }
}

/// One split-operator step of `state` under `schedule`.
pub fn som_step(
    state: &WaveState,
    schedule: &BarrierSchedule,
    t: f64,
    dt: f64,
) -> Result<WaveState> {
    let mut prop = Propagator::new(schedule, state.grid)?;
    let mut out = state.clone();
    prop.step(&mut out.amplitudes, t, dt, TimeMode::RealTime);
    out.time = t + dt;
    Ok(out)
}

/// Runs `config.n_steps` steps from `state.time`, recording dot probabilities
/// and the norm every `record_stride` steps.
pub fn evolve(
    state: &WaveState,
    schedule: &BarrierSchedule,
    config: &PropagatorConfig,
    dots: &[(f64, f64)],
) -> Result<EvolutionTrace> {
    let mut prop = Propagator::new(schedule, state.grid)?;
    evolve_with(&mut prop, state, config, dots)
}

/// [`evolve`] with a prepared propagator.
pub fn evolve_with(
    prop: &mut Propagator,
    state: &WaveState,
    config: &PropagatorConfig,
    dots: &[(f64, f64)],
) -> Result<EvolutionTrace> {
    config.validate()?;
    if state.grid != *prop.grid() {
        return Err(Error::invalid("state grid differs from propagator grid"));
    }
    let t0 = state.time;
    let mut psi = state.clone();
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        dot_probs: Vec::new(),
        norm_series: Vec::new(),
        snapshots: config.snapshots.then(Vec::new),
        final_state: state.clone(),
    };
    let record = |psi: &WaveState, trace: &mut EvolutionTrace| -> Result<()> {
        trace.times.push(psi.time);
        trace.dot_probs.push(dot_probabilities(psi, dots)?);
        trace.norm_series.push(norm(psi));
        if let Some(s) = trace.snapshots.as_mut() {
            s.push(psi.density());
        }
        Ok(())
    };
    record(&psi, &mut trace)?;
    for step in 0..config.n_steps {
        let t = t0 + step as f64 * config.dt;
        prop.step(&mut psi.amplitudes, t, config.dt, config.mode);
        if config.mode == TimeMode::ImaginaryTime {
            psi = psi.normalized();
        }
        psi.time = t0 + (step + 1) as f64 * config.dt;
        if (step + 1) % config.record_stride == 0 {
            record(&psi, &mut trace)?;
        }
    }
    trace.final_state = psi;
    Ok(trace)
}

/// Lowest state of a static potential by imaginary-time diffusion.
///
/// Starts from `initial` or, when absent, the half-sine of the grid. Stops
/// when the energy changes by less than `tol` (relative) between strides.
pub fn ground_state_imaginary_time(
    potential: &EmbeddedPotential,
    grid: Grid,
    config: &PropagatorConfig,
    tol: f64,
    initial: Option<WaveState>,
) -> Result<WaveState> {
    config.validate()?;
    if config.mode != TimeMode::ImaginaryTime {
        return Err(Error::invalid(
            "ground-state search needs imaginary-time mode",
        ));
    }
    let mut prop = Propagator::new(&BarrierSchedule::fixed(potential.clone()), grid)?;
    let mut psi = match initial {
        Some(s) => s,
        None => WaveState::from_fn(grid, |x| (PI * (x - grid.offset) / grid.length).sin()),
    };
    if norm(&psi) == 0.0 {
        return Err(Error::invalid("initial guess is zero"));
    }
    psi = psi.normalized();
    let mut last = energy_expectation(&psi, potential).energy;
    for step in 0..config.n_steps {
        prop.step(&mut psi.amplitudes, 0.0, config.dt, TimeMode::ImaginaryTime);
        psi = psi.normalized();
        if (step + 1) % config.record_stride == 0 {
            let e = energy_expectation(&psi, potential).energy;
            let change = ((e - last) / e.abs().max(f64::MIN_POSITIVE)).abs();
            last = e;
            if change < tol {
                psi.time = 0.0;
                return Ok(psi);
            }
        }
    }
    Err(Error::NotConverged {
        steps: config.n_steps,
        last_energy: last,
    })
}

/// Heatmap CSV: a header of x coordinates, then one row per recorded time.
pub fn write_heatmap_csv(out: &mut impl Write, trace: &EvolutionTrace) -> Result<()> {
    let snaps = trace
        .snapshots
        .as_ref()
        .ok_or_else(|| Error::invalid("trace has no snapshots"))?;
    let grid = &trace.final_state.grid;
    let io = |e| Error::io("heatmap", e);
    write!(out, "t").map_err(io)?;
    for x in grid.xs() {
        write!(out, ",{x}").map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    for (t, row) in trace.times.iter().zip(snaps) {
        write!(out, "{t}").map_err(io)?;
        for v in row {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

/// `t,p1,...,pN,norm` rows.
pub fn write_dot_probs_csv(out: &mut impl Write, trace: &EvolutionTrace) -> std::io::Result<()> {
    let n = trace.dot_probs.first().map_or(0, Vec::len);
    write!(out, "t")?;
    for d in 1..=n {
        write!(out, ",p{d}")?;
    }
    writeln!(out, ",norm")?;
    for ((t, p), nrm) in trace
        .times
        .iter()
        .zip(&trace.dot_probs)
        .zip(&trace.norm_series)
    {
        write!(out, "{t}")?;
        for v in p {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{nrm}")?;
    }
    Ok(())
}
