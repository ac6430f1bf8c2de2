use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use super::config::{ApproxModeConfig, NoiseSolver, PulseWidth, Scenario, ScenarioConfig};
use crate::eigen::{
    find_doublet, hopping_from_splitting, localized_states, solve_bound_states, BasisSpec,
    EigenSolution,
};
use crate::error::{Error, Result, StageContext};
use crate::noise::{
    decay_check, ensemble_run, DecayCheck, EnsembleTrace, NoiseTarget, SomNoiseTarget,
    TbNoiseTarget, TelegraphModel,
};
use crate::potential::{
    approximate_piecewise, embed_in_infinite_well, segment_dots, ApproxMode, BarrierModulation,
    BarrierSchedule, EmbeddedPotential, InnerPotential, Potential, StepFunction,
};
use crate::splitop::{evolve, EvolutionTrace, PropagatorConfig};
use crate::tightbinding::{
    gate_pulse_width, propagate, rabi_period, AmplitudeTrace, Pulse, TBSchedule,
};
use crate::wave::{Grid, WaveState};

/// Summary written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub config: serde_json::Value,
    pub units: UnitsEcho,
    pub eigen: Option<EigenSummary>,
    pub pulses: Vec<ResolvedPulse>,
    pub horizon: Option<f64>,
    pub histograms: Vec<Histogram>,
    pub comparison: Option<Deviation>,
    pub ensemble: Option<EnsembleSummary>,
    pub approximations: Vec<ApproxSummary>,
    /// Files written, filled in by `emit_outputs`.
    pub files: Vec<FileRecord>,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitsEcho {
    pub x0_nm: f64,
    pub e0_micro_ev: f64,
    pub t0_ps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub n_basis: usize,
    pub length: f64,
    pub n_bound: usize,
    pub lowest: Vec<f64>,
    pub dots: Vec<(f64, f64)>,
    /// Idle hopping per link from the doublet splittings, when calibrated.
    pub idle_hoppings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedPulse {
    /// One-based barrier.
    pub barrier: usize,
    pub start: f64,
    pub width: f64,
    pub height: Option<f64>,
    pub t_low: Option<f64>,
    pub t_high: Option<f64>,
    pub amplitude_mv: Option<f64>,
}

/// Final probabilities in the detector dots and what is left elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub solver: String,
    /// One-based dots.
    pub dots: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub residual: f64,
}

impl Histogram {
    fn new(solver: &str, targets: &[usize], probs: &[f64], norm: f64) -> Self {
        let probabilities: Vec<f64> = targets.iter().map(|&d| probs[d]).collect();
        let residual = norm - probabilities.iter().sum::<f64>();
        Self {
            solver: solver.into(),
            dots: targets.iter().map(|d| d + 1).collect(),
            probabilities,
            residual,
        }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum::<f64>() + self.residual
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Deviation {
    pub max: Vec<f64>,
    pub rms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleSummary {
    pub solver: String,
    pub n_runs: usize,
    pub master_seed: u64,
    pub dot: usize,
    pub decay: DecayCheck,
    pub decayed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxSummary {
    pub label: String,
    pub n_segments: usize,
    pub n_bound: usize,
    /// Largest deviation of the lowest six levels from the table spectrum.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

/// Aligned dot probabilities from both solvers.
#[derive(Debug, Clone)]
pub struct ComparisonTrace {
    pub times: Vec<f64>,
    pub som: Vec<Vec<f64>>,
    pub tb: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ApproxSpectrum {
    pub label: String,
    pub solution: EigenSolution,
}

/// Everything a run produced, ready for [`super::emit_outputs`].
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub report: RunReport,
    pub potential: Option<EmbeddedPotential>,
    pub spectrum: Option<EigenSolution>,
    pub initial_state: Option<WaveState>,
    pub som: Option<EvolutionTrace>,
    pub tb: Option<AmplitudeTrace>,
    pub comparison: Option<ComparisonTrace>,
    pub ensemble: Option<EnsembleTrace>,
    pub approximations: Vec<ApproxSpectrum>,
}

struct Timer(Vec<StageTiming>);

impl Timer {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(stage);
        self.0.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Hopping across `link` from the doublet of `p`.
fn calibrate(
    p: &EmbeddedPotential,
    n_basis: usize,
    dots: &[(f64, f64)],
    link: usize,
) -> Result<f64> {
    let sol = solve_bound_states(p, &BasisSpec::new(n_basis, p.length())?, None)?;
    calibrate_from(&sol, dots, link)
}

fn calibrate_from(sol: &EigenSolution, dots: &[(f64, f64)], link: usize) -> Result<f64> {
    let pair = find_doublet(sol, dots, (link, link + 1))?;
    hopping_from_splitting(sol, pair)
}

/// Segment index of each barrier, left to right.
fn barrier_segments(p: &EmbeddedPotential) -> Vec<usize> {
    match p.inner() {
        InnerPotential::Piecewise(pw) => pw.barrier_segments(),
        _ => Vec::new(),
    }
}

fn with_barrier(p: &EmbeddedPotential, segment: usize, height: f64) -> Result<EmbeddedPotential> {
    let InnerPotential::Piecewise(pw) = p.inner() else {
        return Err(Error::invalid("barrier heights need a piecewise potential"));
    };
    p.with_inner(pw.with_segment_value(segment, height)?)
}

fn deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> Deviation {
    let n = a.first().map_or(0, Vec::len);
    let mut max = vec![0.0f64; n];
    let mut sq = vec![0.0; n];
    for (ra, rb) in a.iter().zip(b) {
        for d in 0..n {
            let e = (ra[d] - rb[d]).abs();
            max[d] = max[d].max(e);
            sq[d] += e * e;
        }
    }
    let rows = a.len().max(1) as f64;
    Deviation {
        max,
        rms: sq.into_iter().map(|s| (s / rows).sqrt()).collect(),
    }
}

/// Runs the configured pipeline: potential, eigenstates, calibration, then
/// the selected evolutions, noise ensemble and piecewise approximations.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    let sc = config.resolve()?;
    let mut timer = Timer(Vec::new());
    let units = sc.units;

    // Eigenstates of the idle potential.
    let potential = sc.potential.clone();
    let (spectrum, dots) = match &potential {
        Some(p) => {
            let n_basis = sc.n_basis.expect("resolved with potential");
            let sol = timer.run("eigen", || {
                solve_bound_states(p, &BasisSpec::new(n_basis, p.length())?, sc.bound_threshold)
            })?;
            let dots = match &sc.dots {
                Some(d) => d.clone(),
                None => timer.run("dots", || segment_dots(p))?,
            };
            (Some(sol), dots)
        }
        None => {
            let n = sc.tb_hoppings.as_ref().map_or(1, |h| h.len() + 1);
            (None, (0..n).map(|i| (i as f64, i as f64 + 1.0)).collect())
        }
    };
    let n_dots = dots.len();
    if sc.initial_dot >= n_dots {
        return Err(Error::config("initial_dot", format!("only {n_dots} dots")));
    }
    let targets = sc.targets.clone().unwrap_or_else(|| (0..n_dots).collect());
    if let Some(&bad) = targets.iter().find(|&&d| d >= n_dots) {
        return Err(Error::config(
            "targets",
            format!("dot {} does not exist", bad + 1),
        ));
    }
    let segments = potential.as_ref().map(barrier_segments).unwrap_or_default();
    let n_links = n_dots.saturating_sub(1);
    for (i, p) in sc.pulses.iter().enumerate() {
        if p.barrier >= n_links || (potential.is_some() && p.barrier >= segments.len()) {
            return Err(Error::config(
                format!("pulses[{i}].barrier"),
                format!("no barrier {}", p.barrier + 1),
            ));
        }
    }
    if let Some(n) = &sc.noise {
        if n.barrier >= n_links || (n.solver == NoiseSolver::Som && n.barrier >= segments.len()) {
            return Err(Error::config(
                "noise.barrier",
                format!("no barrier {}", n.barrier + 1),
            ));
        }
    }

    // Hopping calibration, only where something consumes it.
    let needs_tb = sc.solver.tb() || sc.noise.is_some_and(|n| n.solver == NoiseSolver::Tb);
    let idle_hoppings: Option<Vec<f64>> = match (&sc.tb_hoppings, &spectrum) {
        (Some(h), _) => {
            if h.len() != n_links {
                return Err(Error::config(
                    "tb.hoppings",
                    format!("{n_links} links need {n_links} hoppings"),
                ));
            }
            Some(h.clone())
        }
        (None, Some(sol)) if needs_tb => Some(timer.run("calibration", || {
            (0..n_links)
                .map(|l| calibrate_from(sol, &dots, l))
                .collect::<Result<Vec<_>>>()
        })?),
        _ => None,
    };
    let mut resolved = Vec::with_capacity(sc.pulses.len());
    let mut last_end = 0.0;
    timer.run("pulses", || {
        for p in &sc.pulses {
            let calibrated_high = match (&potential, p.height) {
                (Some(pot), Some(h)) if needs_tb || matches!(p.width, PulseWidth::Gate { .. }) => {
                    let lowered = with_barrier(pot, segments[p.barrier], h)?;
                    Some(calibrate(
                        &lowered,
                        sc.n_basis.expect("potential"),
                        &dots,
                        p.barrier,
                    )?)
                }
                _ => None,
            };
            let t_high = p.t_high.or(calibrated_high);
            let width = match p.width {
                PulseWidth::Fixed(w) => w,
                PulseWidth::Gate { kind, k } => {
                    let t = calibrated_high
                        .or(p.t_high)
                        .ok_or_else(|| Error::Calibration("gate width needs a hopping".into()))?;
                    gate_pulse_width(kind, rabi_period(t)?, k)?
                }
            };
            let start = p.start.unwrap_or(last_end + p.gap);
            last_end = start + width;
            let t_low = p.t_low.or(idle_hoppings.as_ref().map(|h| h[p.barrier]));
            resolved.push(ResolvedPulse {
                barrier: p.barrier + 1,
                start,
                width,
                height: p.height,
                t_low,
                t_high,
                amplitude_mv: p.amplitude_mv,
            });
        }
        Ok(())
    })?;
    let pulse_end = resolved
        .iter()
        .map(|p| p.start + p.width)
        .fold(0.0, f64::max);
    let evolves = sc.solver.som() || sc.solver.tb() || sc.noise.is_some();
    let horizon = evolves.then(|| sc.time.horizon.unwrap_or(pulse_end + sc.time.tail));

    // Step counts shared by SOM, TB and the comparison.
    let (dt, n_steps, stride, record_dt) = match (horizon, sc.time.dt) {
        (Some(h), Some(dt)) => {
            let n_steps = ((h / dt) - 1e-9).ceil().max(1.0) as usize;
            let stride = ((sc.time.record_every / dt).round() as usize).clamp(1, n_steps);
            // The horizon grows to a whole number of record intervals so
            // the last SOM sample sits on the horizon, as it does for TB.
            let n_steps = n_steps.div_ceil(stride) * stride;
            (dt, n_steps, stride, stride as f64 * dt)
        }
        (Some(h), None) => (0.0, 0, 0, sc.time.record_every.min(h)),
        _ => (0.0, 0, 0, 0.0),
    };
    let horizon = horizon.map(|h| if n_steps > 0 { n_steps as f64 * dt } else { h });

    // Split-operator pieces.
    let needs_som = sc.solver.som() || sc.noise.is_some_and(|n| n.solver == NoiseSolver::Som);
    let mut som_schedule = None;
    let mut initial_state = None;
    let mut som_config = None;
    if needs_som {
        let p = potential.as_ref().expect("resolved with potential");
        let sol = spectrum.as_ref().expect("eigen ran");
        let grid = Grid::new(sc.n_points.expect("resolved"), p.length())?;
        initial_state = Some(timer.run("localize", || {
            Ok(localized_states(sol, &dots, &grid)?.swap_remove(sc.initial_dot))
        })?);
        let mut by_barrier: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); segments.len()];
        for r in &resolved {
            by_barrier[r.barrier - 1].push((r.start, r.width, r.height.expect("resolved for SOM")));
        }
        let mods = by_barrier
            .into_iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(b, v)| {
                let InnerPotential::Piecewise(pw) = p.inner() else {
                    unreachable!()
                };
                let base = pw.segment_value(segments[b]).expect("constant");
                Ok(BarrierModulation {
                    segment: segments[b],
                    heights: StepFunction::pulses(base, &v)
                        .map_err(|e| Error::config("pulses", e.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        som_schedule = Some(BarrierSchedule::new(p.clone(), mods)?);
        let mut cfg = PropagatorConfig::new(dt, n_steps, stride)?;
        if sc.output.heatmap {
            cfg = cfg.with_snapshots();
        }
        som_config = Some(cfg);
    }
    let som = if sc.solver.som() {
        let (psi, sched, cfg) = (
            initial_state.as_ref().expect("built"),
            som_schedule.as_ref().expect("built"),
            som_config.as_ref().expect("built"),
        );
        Some(timer.run("som", || evolve(psi, sched, cfg, &dots))?)
    } else {
        None
    };

    // Tight-binding pieces.
    let mut tb_schedule = None;
    let mut c0 = vec![Complex64::new(0.0, 0.0); n_dots];
    c0[sc.initial_dot] = Complex64::new(1.0, 0.0);
    if needs_tb {
        let idle = idle_hoppings.clone().expect("calibrated or given");
        let pulses: Vec<Pulse> = resolved
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Ok(Pulse {
                    link: (r.barrier - 1, r.barrier),
                    t_low: r.t_low.unwrap_or(idle[r.barrier - 1]),
                    t_high: r.t_high.ok_or_else(|| {
                        Error::config(format!("pulses[{i}].t_high"), "no hopping for this pulse")
                    })?,
                    t_start: r.start,
                    width: r.width,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tb_schedule = Some(
            TBSchedule::new(n_dots, &idle, pulses)
                .map_err(|e| Error::config("pulses", e.to_string()))?,
        );
    }
    let tb = if sc.solver.tb() {
        let sched = tb_schedule.as_ref().expect("built");
        let h = horizon.expect("evolves");
        Some(timer.run("tb", || propagate(&c0, sched, h, record_dt))?)
    } else {
        None
    };

    let comparison = match (&som, &tb) {
        (Some(s), Some(t)) => {
            let tb_probs = t.probabilities();
            if s.times.len() != t.times.len()
                || s.times
                    .iter()
                    .zip(&t.times)
                    .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
            {
                return Err(Error::Numeric(
                    "SOM and TB record times do not line up".into(),
                ));
            }
            Some(ComparisonTrace {
                times: s.times.clone(),
                som: s.dot_probs.clone(),
                tb: tb_probs,
            })
        }
        _ => None,
    };

    let mut histograms = Vec::new();
    if let Some(s) = &som {
        let last = s.dot_probs.last().expect("recorded");
        histograms.push(Histogram::new(
            "som",
            &targets,
            last,
            *s.norm_series.last().expect("recorded"),
        ));
    }
    if let Some(t) = &tb {
        let last: Vec<f64> = t.final_amplitudes().iter().map(|a| a.norm_sqr()).collect();
        let norm = last.iter().sum();
        histograms.push(Histogram::new("tb", &targets, &last, norm));
    }

    // Noise ensemble.
    let mut ensemble = None;
    let mut ensemble_summary = None;
    if let Some(n) = &sc.noise {
        let model = TelegraphModel {
            v_min: n.v_min,
            v_max: n.v_max,
            mean_dwell: n.mean_dwell,
            seed: sc.seed,
            start_high: n.start_high,
        };
        let tr = timer.run("noise", || {
            let target: Box<dyn NoiseTarget> = match n.solver {
                NoiseSolver::Som => {
                    let mut cfg = som_config.expect("built");
                    cfg.snapshots = false;
                    Box::new(SomNoiseTarget {
                        schedule: som_schedule.clone().expect("built"),
                        segment: segments[n.barrier],
                        initial: initial_state.clone().expect("built"),
                        config: cfg,
                        dots: dots.clone(),
                    })
                }
                NoiseSolver::Tb => {
                    let mut levels = vec![(n.v_min, 0.0), (n.v_max, 0.0)];
                    for (v, t) in levels.iter_mut() {
                        *t =
                            match &potential {
                                Some(p) if n.barrier < segments.len() => {
                                    let q = with_barrier(p, segments[n.barrier], *v)?;
                                    calibrate(&q, sc.n_basis.expect("potential"), &dots, n.barrier)?
                                }
                                _ => return Err(Error::config(
                                    "noise.solver",
                                    "tight-binding noise needs a piecewise potential to calibrate",
                                )),
                            };
                    }
                    Box::new(TbNoiseTarget {
                        schedule: tb_schedule.clone().expect("built"),
                        link: n.barrier,
                        hopping_of_level: levels,
                        initial: c0.clone(),
                        horizon: horizon.expect("evolves"),
                        record_dt,
                    })
                }
            };
            ensemble_run(target.as_ref(), &model, n.n_runs)
        })?;
        let decay = decay_check(&tr, sc.initial_dot)?;
        ensemble_summary = Some(EnsembleSummary {
            solver: match n.solver {
                NoiseSolver::Som => "som",
                NoiseSolver::Tb => "tb",
            }
            .into(),
            n_runs: n.n_runs,
            master_seed: sc.seed,
            dot: sc.initial_dot + 1,
            decayed: decay.decayed(),
            decay,
        });
        ensemble = Some(tr);
    }

    // Piecewise stand-ins for a table potential.
    let mut approximations = Vec::new();
    let mut approx_summaries = Vec::new();
    if !sc.approximations.is_empty() {
        let p = potential.as_ref().expect("table potential");
        let sol = spectrum.as_ref().expect("eigen ran");
        let InnerPotential::Sampled(table) = p.inner() else {
            return Err(Error::config(
                "approximations",
                "approximations need a table potential",
            ));
        };
        let results = timer.run("approximations", || {
            sc.approximations
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let (mode, label) = match a.mode {
                        ApproxModeConfig::Coarse => (ApproxMode::Coarse, "coarse"),
                        ApproxModeConfig::Fine => (
                            ApproxMode::Fine {
                                tolerance: a.tolerance.expect("resolved"),
                            },
                            "fine",
                        ),
                    };
                    let pw = approximate_piecewise(table as &dyn Potential, mode, a.budget)?;
                    let n_segments = pw.n_segments();
                    let q = embed_in_infinite_well(pw, p.margin(), p.length())?;
                    let s = solve_bound_states(&q, &sol.basis, sc.bound_threshold)?;
                    let max_deviation = s
                        .energies
                        .iter()
                        .zip(&sol.energies)
                        .take(6)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    // Suffix the index only when a mode appears more than once.
                    let repeated = sc
                        .approximations
                        .iter()
                        .filter(|b| b.mode == a.mode)
                        .count()
                        > 1;
                    let label = if repeated {
                        format!("{label}{}", i + 1)
                    } else {
                        label.to_string()
                    };
                    Ok((
                        ApproxSummary {
                            label: label.clone(),
                            n_segments,
                            n_bound: s.n_bound,
                            max_deviation,
                        },
                        ApproxSpectrum { label, solution: s },
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (s, a) in results {
            approx_summaries.push(s);
            approximations.push(a);
        }
    }

    let eigen = spectrum.as_ref().map(|sol| EigenSummary {
        n_basis: sol.basis.n_basis,
        length: sol.basis.length,
        n_bound: sol.n_bound,
        lowest: sol.energies.iter().take(sc.n_report).copied().collect(),
        dots: dots.clone(),
        idle_hoppings: idle_hoppings.clone(),
    });
    let report = RunReport {
        name: sc.name.clone(),
        config: serde_json::to_value(config).expect("config serializes"),
        units: UnitsEcho {
            x0_nm: units.x0 * 1e9,
            e0_micro_ev: units.e0_micro_ev(),
            t0_ps: units.t0 * 1e12,
        },
        eigen,
        pulses: resolved,
        horizon,
        histograms,
        comparison: comparison.as_ref().map(|c| deviation(&c.som, &c.tb)),
        ensemble: ensemble_summary,
        approximations: approx_summaries,
        files: Vec::new(),
        timings: timer.0,
    };
    Ok(ScenarioOutput {
        scenario: sc,
        report,
        potential,
        spectrum,
        initial_state,
        som,
        tb,
        comparison,
        ensemble,
        approximations,
    })
}
