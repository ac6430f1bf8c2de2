use std::f64::consts::PI;

use num_complex::Complex64;
use qdsim::noise::{
    decay_check, ensemble_run, run_seed, student_ci, telegraph_trajectory, write_ensemble_csv,
    TbNoiseTarget, TelegraphModel,
};
use qdsim::tightbinding::TBSchedule;
use qdsim::units::UnitSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn switch_count_matches_poisson(rate_times_horizon: f64) {
    let horizon = 10.0;
    let dwell = horizon / rate_times_horizon;
    let n = 10_000;
    let counts: Vec<f64> = (0..n)
        .map(|s| {
            let m = TelegraphModel::new(0.0, 1.0, dwell, s).unwrap();
            telegraph_trajectory(&m, horizon).unwrap().switches().len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let sigma = (rate_times_horizon / n as f64).sqrt();
    assert!(
        (mean - rate_times_horizon).abs() < 3.0 * sigma,
        "{mean} vs {rate_times_horizon} ± {sigma}"
    );
}

#[test]
fn rare_switching_is_poisson() {
    switch_count_matches_poisson(0.05);
}

#[test]
fn frequent_switching_is_poisson() {
    switch_count_matches_poisson(3.0);
}

#[test]
fn mean_dwell_is_reproduced() {
    let m = TelegraphModel::new(4.0, 5.0, 0.2, 2024).unwrap();
    let f = telegraph_trajectory(&m, 0.2 * 100_500.0).unwrap();
    let t: Vec<f64> = f.switch_times().collect();
    assert!(t.len() > 100_000);
    let gaps: Vec<f64> = t.windows(2).take(100_000).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 0.2).abs() / 0.2 < 0.01, "{mean}");
}

#[test]
fn same_seed_same_trajectory() {
    let m = TelegraphModel::new(4.0, 5.0, 1.0, 99).unwrap();
    assert_eq!(
        telegraph_trajectory(&m, 100.0).unwrap(),
        telegraph_trajectory(&m, 100.0).unwrap()
    );
    assert_ne!(
        telegraph_trajectory(&m, 100.0).unwrap(),
        telegraph_trajectory(&m.with_seed(100), 100.0).unwrap()
    );
}

#[test]
fn ci_approaches_normal_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (_, h) = student_ci(&xs, 0.95).unwrap();
    let expect = 1.96 / (n as f64).sqrt();
    assert!((h - expect).abs() / expect < 0.05, "{h} vs {expect}");
}

fn rabi_pair(t_h: f64) -> TbNoiseTarget {
    TbNoiseTarget {
        schedule: TBSchedule::constant(2, t_h).unwrap(),
        link: 0,
        hopping_of_level: vec![(0.0, t_h)],
        initial: vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        horizon: 5.0,
        record_dt: 0.05,
    }
}

#[test]
fn noiseless_ensemble_is_analytic() {
    let t_h = 0.4;
    let model = TelegraphModel::new(0.0, 0.0, 1.0, 11).unwrap();
    let tr = ensemble_run(&rabi_pair(t_h), &model, 10).unwrap();
    assert_eq!(tr.n_runs, 10);
    for (t, p) in tr.times.iter().zip(tr.mean_series(1)) {
        assert!((p - (2.0 * PI * t_h * t).sin().powi(2)).abs() < 1e-6);
    }
    assert!(tr.ci_half_width.iter().flatten().all(|&h| h == 0.0));
}

#[test]
fn ensemble_needs_two_runs() {
    let model = TelegraphModel::new(0.0, 0.0, 1.0, 11).unwrap();
    assert!(ensemble_run(&rabi_pair(0.4), &model, 1).is_err());
}

/// Two dots with a noisy link and a third behind a tall barrier; hoppings
/// are the doublet half-splittings for noisy barrier heights 4 and 5.
fn noisy_chain() -> TbNoiseTarget {
    let horizon = 3e-9 / UnitSystem::silicon().t0;
    TbNoiseTarget {
        schedule: TBSchedule::constant(3, 0.0).unwrap(),
        link: 0,
        hopping_of_level: vec![(4.0, 0.1079), (5.0, 0.0842)],
        initial: vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        horizon,
        record_dt: 0.05,
    }
}

fn dwell() -> f64 {
    0.2e-9 / UnitSystem::silicon().t0
}

#[test]
fn ensemble_is_deterministic_and_bounded() {
    let model = TelegraphModel::new(4.0, 5.0, dwell(), 7).unwrap();
    let a = ensemble_run(&noisy_chain(), &model, 20).unwrap();
    let b = ensemble_run(&noisy_chain(), &model, 20).unwrap();
    assert_eq!(a, b);
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_ensemble_csv(&mut ca, &a).unwrap();
    write_ensemble_csv(&mut cb, &b).unwrap();
    assert_eq!(ca, cb);
    assert!(String::from_utf8(ca)
        .unwrap()
        .starts_with("t,mean_p1,mean_p2,mean_p3,ci_p1,ci_p2,ci_p3\n"));
    assert_eq!(
        a.per_run_seeds,
        (0..20).map(|i| run_seed(7, i)).collect::<Vec<_>>()
    );
    for (m, h) in a
        .mean_probs
        .iter()
        .flatten()
        .zip(a.ci_half_width.iter().flatten())
    {
        assert!((0.0..=1.0).contains(m));
        assert!(*h >= 0.0);
    }
}

#[test]
fn zero_noise_ensemble_equals_single_run() {
    let model = TelegraphModel::new(4.0, 4.0, dwell(), 3).unwrap();
    let target = noisy_chain();
    let tr = ensemble_run(&target, &model, 5).unwrap();
    let single = {
        use qdsim::noise::NoiseTarget;
        target
            .realize(&telegraph_trajectory(&model, target.horizon).unwrap())
            .unwrap()
    };
    for (m, s) in tr.mean_probs.iter().zip(&single.probs) {
        for (a, b) in m.iter().zip(s) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    assert!(tr.ci_half_width.iter().flatten().all(|&h| h < 1e-12));
}

#[test]
fn oscillations_decay_over_repeated_experiments() {
    let diffs: Vec<f64> = (0..5)
        .map(|rep| {
            let model = TelegraphModel::new(4.0, 5.0, dwell(), 1000 + rep).unwrap();
            let tr = ensemble_run(&noisy_chain(), &model, 100).unwrap();
            let d = decay_check(&tr, 0).unwrap();
            d.first_amplitude - d.last_amplitude
        })
        .collect();
    let (mean, half) = student_ci(&diffs, 0.95).unwrap();
    assert!(mean - half > 0.0, "{diffs:?}");
}
