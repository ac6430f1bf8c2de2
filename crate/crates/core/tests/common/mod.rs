//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    // Pre-split so oscillatory integrands cannot fool the first estimate.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            rec(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn composite_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Root of `f` in `[a, b]` by bisection; `f(a)` and `f(b)` must differ in sign.
pub fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Bound levels of a square well of `depth` and `width` centred in a hard-walled
/// box of width `length`, from the even and odd matching conditions.
///
/// Inside the well `ψ ∝ cos(kx)` or `sin(kx)`; in the barriers
/// `ψ ∝ sinh(κ·(distance to the wall))`.
pub fn square_well_levels(depth: f64, width: f64, length: f64) -> Vec<f64> {
    let a = 0.5 * width;
    let d = 0.5 * (length - width);
    let even = move |e: f64| {
        let (k, kappa) = (e.sqrt(), (depth - e).sqrt());
        k * (k * a).sin() * (kappa * d).tanh() - kappa * (k * a).cos()
    };
    let odd = move |e: f64| {
        let (k, kappa) = (e.sqrt(), (depth - e).sqrt());
        k * (k * a).cos() * (kappa * d).tanh() + kappa * (k * a).sin()
    };
    let mut levels = Vec::new();
    let steps = 200_000;
    for g in [&even as &dyn Fn(f64) -> f64, &odd] {
        let mut prev_e = 1e-12;
        let mut prev = g(prev_e);
        for i in 1..steps {
            let e = depth * i as f64 / steps as f64;
            let v = g(e);
            if v.signum() != prev.signum() {
                levels.push(bisect(g, prev_e, e));
            }
            prev_e = e;
            prev = v;
        }
    }
    levels.sort_by(f64::total_cmp);
    levels
}

/// Classical RK4 for `i/(2π)·dc/dt = H(t)·c` with a fixed step.
pub fn rk4_schrodinger(
    h: &dyn Fn(f64) -> Vec<Vec<f64>>,
    c0: &[Complex64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Vec<Complex64> {
    let n = c0.len();
    let rhs = |t: f64, c: &[Complex64]| -> Vec<Complex64> {
        let m = h(t);
        let factor = Complex64::new(0.0, -2.0 * std::f64::consts::PI);
        (0..n)
            .map(|i| factor * (0..n).map(|j| m[i][j] * c[j]).sum::<Complex64>())
            .collect()
    };
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let dt = (t1 - t0) / steps as f64;
    let mut c = c0.to_vec();
    let mut t = t0;
    let axpy = |c: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> {
        c.iter().zip(k).map(|(a, b)| a + b * s).collect()
    };
    for _ in 0..steps {
        let k1 = rhs(t, &c);
        let k2 = rhs(t + 0.5 * dt, &axpy(&c, &k1, 0.5 * dt));
        let k3 = rhs(t + 0.5 * dt, &axpy(&c, &k2, 0.5 * dt));
        let k4 = rhs(t + dt, &axpy(&c, &k3, dt));
        for i in 0..n {
            c[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        t += dt;
    }
    c
}

/// Sign changes of a sampled real function, ignoring samples below `floor`.
pub fn sign_changes(values: &[f64], floor: f64) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}
