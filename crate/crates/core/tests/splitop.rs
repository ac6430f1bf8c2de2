mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use qdsim::eigen::{localized_states, reconstruct_wavefunction, solve_bound_states, BasisSpec};
use qdsim::potential::{
    embed_in_infinite_well, BarrierSchedule, EmbeddedPotential, PiecewisePotential,
    SampledPotential,
};
use qdsim::splitop::{evolve, ground_state_imaginary_time, Propagator, PropagatorConfig, TimeMode};
use qdsim::wave::{energy_expectation, Grid, WaveState};

fn harmonic(l: f64) -> EmbeddedPotential {
    let inner = SampledPotential::from_fn(0.0, l, 201, |x| 4.0 * (x - 0.5 * l).powi(2)).unwrap();
    embed_in_infinite_well(inner, 0.0, l).unwrap()
}

fn phase_after(p: &EmbeddedPotential, n: usize, dt: f64, tau: f64) -> (f64, f64) {
    let l = p.length();
    let sol = solve_bound_states(p, &BasisSpec::new(200, l).unwrap(), None).unwrap();
    let g = Grid::new(512, l).unwrap();
    let psi0 = reconstruct_wavefunction(&sol, n, &g).unwrap();
    let mut prop = Propagator::new(&BarrierSchedule::fixed(p.clone()), g).unwrap();
    let mut psi = psi0.clone();
    let steps = (tau / dt).round() as usize;
    let mut unwrapped = 0.0;
    let mut last = 0.0;
    for s in 0..steps {
        prop.step(&mut psi.amplitudes, s as f64 * dt, dt, TimeMode::RealTime);
        // Follow the phase continuously through the ±π cut.
        let a = psi0.overlap(&psi).arg();
        let mut d = a - last;
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        unwrapped += d;
        last = a;
    }
    (unwrapped, sol.energies[n])
}

#[test]
fn free_gaussian_moves_ballistically() {
    let (l, x0, sigma, k0) = (40.0, 12.0, 1.0, 2.0);
    let g = Grid::new(512, l).unwrap();
    let amps = g
        .xs()
        .map(|x| {
            let env = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
            Complex64::from_polar(env, k0 * x)
        })
        .collect();
    let psi = WaveState::new(g, amps).unwrap().normalized();
    let sched = BarrierSchedule::fixed(EmbeddedPotential::infinite_well(l).unwrap());
    let tau = 0.5;
    let cfg = PropagatorConfig::new(1e-4, 5000, 5000).unwrap();
    let tr = evolve(&psi, &sched, &cfg, &[(0.0, l)]).unwrap();
    let out = &tr.final_state;
    assert!((out.norm() - 1.0).abs() < 1e-10);
    let dens = out.density();
    let mean: f64 = g.xs().zip(&dens).map(|(x, d)| x * d).sum::<f64>() * g.spacing;
    let var: f64 = g
        .xs()
        .zip(&dens)
        .map(|(x, d)| (x - mean).powi(2) * d)
        .sum::<f64>()
        * g.spacing;
    // ħ/(2m) is 2π in these units.
    let expect_mean = x0 + 4.0 * PI * k0 * tau;
    let expect_width = sigma * (1.0 + (2.0 * PI * tau / (sigma * sigma)).powi(2)).sqrt();
    assert!((mean - expect_mean).abs() < 1e-3, "{mean} vs {expect_mean}");
    assert!(
        (var.sqrt() - expect_width).abs() < 1e-3,
        "{} vs {expect_width}",
        var.sqrt()
    );
}

#[test]
fn eigenstate_stays_put_and_rotates() {
    let p = harmonic(10.0);
    for n in 0..3 {
        let tau = 1.0;
        let (phase, e) = phase_after(&p, n, 1e-4, tau);
        let expect = -2.0 * PI * e * tau;
        assert!(
            (phase - expect).abs() < 1e-4 * tau,
            "state {n}: {phase} vs {expect}"
        );
    }
}

#[test]
fn eigenstate_overlap_is_conserved() {
    let p = harmonic(10.0);
    let l = p.length();
    let sol = solve_bound_states(&p, &BasisSpec::new(200, l).unwrap(), None).unwrap();
    let g = Grid::new(512, l).unwrap();
    let psi0 = reconstruct_wavefunction(&sol, 1, &g).unwrap();
    let cfg = PropagatorConfig::new(1e-4, 10_000, 10_000).unwrap();
    let tr = evolve(&psi0, &BarrierSchedule::fixed(p), &cfg, &[(0.0, l)]).unwrap();
    assert!((psi0.overlap(&tr.final_state).norm() - 1.0).abs() < 1e-6);
    for n in &tr.norm_series {
        assert!((n - 1.0).abs() < 1e-9);
    }
}

#[test]
fn phase_error_is_second_order() {
    let p = harmonic(10.0);
    let tau = 0.4;
    let phases: Vec<f64> = [4e-3, 2e-3, 1e-3]
        .iter()
        .map(|&dt| phase_after(&p, 0, dt, tau).0)
        .collect();
    let ratio = (phases[0] - phases[1]) / (phases[1] - phases[2]);
    assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
}

#[test]
fn norm_is_conserved_over_ten_thousand_steps() {
    let inner = PiecewisePotential::constant(
        vec![0.0, 1.0, 4.0, 5.0, 8.0, 9.0],
        vec![200.0, 0.0, 64.0, 0.0, 200.0],
    )
    .unwrap();
    let base = embed_in_infinite_well(inner, 0.0, 9.0).unwrap();
    let g = Grid::new(512, 9.0).unwrap();
    let psi = WaveState::from_fn(g, |x| (-(x - 2.5f64).powi(2) * 2.0).exp()).normalized();
    let cfg = PropagatorConfig::new(1e-4, 10_000, 100).unwrap();
    let tr = evolve(&psi, &BarrierSchedule::fixed(base), &cfg, &[(1.0, 4.0)]).unwrap();
    let worst = tr
        .norm_series
        .iter()
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn energy_is_conserved_for_static_potential() {
    let p = harmonic(10.0);
    let g = Grid::new(512, 10.0).unwrap();
    let psi = WaveState::from_fn(g, |x| (-(x - 4.0f64).powi(2)).exp()).normalized();
    let e0 = energy_expectation(&psi, &p).energy;
    let cfg = PropagatorConfig::new(1e-4, 100_000, 100_000).unwrap();
    let tr = evolve(
        &psi,
        &BarrierSchedule::fixed(p.clone()),
        &cfg,
        &[(0.0, 10.0)],
    )
    .unwrap();
    let e1 = energy_expectation(&tr.final_state, &p).energy;
    assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
}

#[test]
fn forward_then_backward_returns() {
    let p = harmonic(10.0);
    let g = Grid::new(512, 10.0).unwrap();
    // Vanishes on the walls, like every state the propagator produces.
    let psi0 =
        WaveState::from_fn(g, |x| x * (10.0 - x) * (-(x - 4.0f64).powi(2)).exp()).normalized();
    let mut prop = Propagator::new(&BarrierSchedule::fixed(p), g).unwrap();
    let mut a = psi0.amplitudes.clone();
    let dt = 1e-4;
    for s in 0..2000 {
        prop.step(&mut a, s as f64 * dt, dt, TimeMode::RealTime);
    }
    for s in (0..2000).rev() {
        prop.step(&mut a, (s + 1) as f64 * dt, -dt, TimeMode::RealTime);
    }
    let diff: f64 = a
        .iter()
        .zip(&psi0.amplitudes)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        * g.spacing;
    assert!(diff.sqrt() < 1e-8, "{}", diff.sqrt());
}

#[test]
fn imaginary_time_free_well() {
    let l = 10.0;
    let p = EmbeddedPotential::infinite_well(l).unwrap();
    let g = Grid::new(512, l).unwrap();
    let guess = WaveState::from_fn(g, |x| x * (l - x) * (1.0 + 0.3 * x));
    let cfg = PropagatorConfig::new(1e-3, 200_000, 50)
        .unwrap()
        .imaginary();
    let psi = ground_state_imaginary_time(&p, g, &cfg, 1e-10, Some(guess)).unwrap();
    let e = energy_expectation(&psi, &p).energy;
    assert!((e - (PI / l).powi(2)).abs() < 1e-5, "{e}");
    assert!((psi.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn imaginary_time_matches_eigensolver() {
    let p = harmonic(10.0);
    let g = Grid::new(512, 10.0).unwrap();
    let cfg = PropagatorConfig::new(1e-4, 400_000, 100)
        .unwrap()
        .imaginary();
    let psi = ground_state_imaginary_time(&p, g, &cfg, 1e-10, None).unwrap();
    let sol = solve_bound_states(&p, &BasisSpec::new(200, 10.0).unwrap(), None).unwrap();
    let e = energy_expectation(&psi, &p).energy;
    assert!(
        (e - sol.energies[0]).abs() < 1e-4,
        "{e} vs {}",
        sol.energies[0]
    );
}

#[test]
fn imaginary_time_double_well_is_symmetric() {
    let l = 9.0;
    let inner = PiecewisePotential::constant(
        vec![0.0, 1.0, 4.0, 5.0, 8.0, 9.0],
        vec![40.0, 0.0, 15.0, 0.0, 40.0],
    )
    .unwrap();
    let p = embed_in_infinite_well(inner, 0.0, l).unwrap();
    let g = Grid::new(512, l).unwrap();
    // Start fully in the left well.
    let guess = WaveState::from_fn(g, |x| if (1.0..4.0).contains(&x) { 1.0 } else { 0.0 });
    let cfg = PropagatorConfig::new(1e-3, 400_000, 100)
        .unwrap()
        .imaginary();
    let psi = ground_state_imaginary_time(&p, g, &cfg, 1e-12, Some(guess)).unwrap();
    let n = g.n_points;
    let worst = (1..n)
        .map(|i| (psi.amplitudes[i] - psi.amplitudes[n - i]).norm())
        .fold(0.0, f64::max);
    let peak = psi.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-3 * peak, "{worst}");
}

#[test]
fn isolated_dots_stay_put() {
    // Wide, tall barriers: the localized state of dot 1 should not leak over
    // 2.6 ns (about 55 t0).
    let inner = PiecewisePotential::constant(
        vec![0.0, 1.0, 4.0, 5.5, 8.5, 10.0, 13.0, 14.0],
        vec![200.0, 0.0, 64.0, 0.0, 64.0, 0.0, 200.0],
    )
    .unwrap()
    .with_smoothing(0.1)
    .unwrap();
    let base = embed_in_infinite_well(inner, 0.0, 14.0).unwrap();
    let dots = vec![(0.0, 4.75), (4.75, 9.25), (9.25, 14.0)];
    let sol = solve_bound_states(&base, &BasisSpec::new(200, 14.0).unwrap(), None).unwrap();
    let g = Grid::new(512, 14.0).unwrap();
    let psi = localized_states(&sol, &dots, &g).unwrap().remove(0);
    let horizon = 2.6e-9 / qdsim::units::UnitSystem::silicon().t0;
    let dt = 1e-3;
    let cfg = PropagatorConfig::new(dt, (horizon / dt) as usize, 1000).unwrap();
    let tr = evolve(&psi, &BarrierSchedule::fixed(base), &cfg, &dots).unwrap();
    let first = &tr.dot_probs[0];
    for p in &tr.dot_probs {
        for (a, b) in p.iter().zip(first) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}
