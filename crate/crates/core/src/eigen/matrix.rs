//! Potential matrix elements in the infinite-well sine basis.
//!
//! With `φ_k(x) = sqrt(2/L)·sin(kπx/L)` the product identity
//! `2 sin(a) sin(b) = cos(a-b) - cos(a+b)` gives
//! `V_km = C(|k-m|) - C(k+m)` where `C(j) = (1/L)∫_0^L V(x)·cos(jπx/L) dx`.
//! A whole `N × N` matrix therefore needs only `2N + 1` cosine moments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{EmbeddedPotential, LinearPiece, Potential};
use crate::quadrature::gl8;

/// Absolute tolerance on sampled-potential matrix elements, `E0`.
pub const SAMPLED_TOLERANCE: f64 = 1e-9;

const MAX_REFINEMENT: usize = 64;

/// Contribution of a constant segment of height `height` on `[a, b]` to `V_km`.
pub fn matrix_element_piecewise(
    (a, b): (f64, f64),
    height: f64,
    k: usize,
    m: usize,
    length: f64,
) -> Result<f64> {
    if !(a < b) {
        return Err(Error::invalid(format!("segment [{a}, {b}] is empty")));
    }
    if a < 0.0 || b > length * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "segment [{a}, {b}] outside [0, {length}]"
        )));
    }
    if k == 0 || m == 0 {
        return Err(Error::invalid("basis indices start at 1"));
    }
    let w = PI / length;
    let value = if k == m {
        let kf = k as f64;
        let f = |x: f64| 0.5 * x - (2.0 * kf * w * x).sin() / (4.0 * kf * w);
        2.0 * height / length * (f(b) - f(a))
    } else {
        let d = k as f64 - m as f64;
        let s = (k + m) as f64;
        let f = |x: f64| (d * w * x).sin() / d - (s * w * x).sin() / s;
        height / PI * (f(b) - f(a))
    };
    Ok(value)
}

/// `∫_a^b (alpha + beta·x)·cos(q·x) dx` in closed form.
pub(crate) fn linear_cosine_moment(p: &LinearPiece, q: f64) -> f64 {
    let (a, b) = (p.a, p.b);
    if q == 0.0 {
        return p.alpha * (b - a) + 0.5 * p.beta * (b * b - a * a);
    }
    let f = |x: f64| p.value(x) * (q * x).sin() / q + p.beta * (q * x).cos() / (q * q);
    f(b) - f(a)
}

/// Contribution of a linear piece to `V_km`.
pub fn matrix_element_linear(piece: &LinearPiece, k: usize, m: usize, length: f64) -> f64 {
    let w = PI / length;
    let d = (k as f64 - m as f64).abs();
    (linear_cosine_moment(piece, d * w) - linear_cosine_moment(piece, (k + m) as f64 * w)) / length
}

/// Cosine moments `C(0..=max_j)` of an exactly piecewise-linear profile.
pub(crate) fn cosine_moments_exact(pieces: &[LinearPiece], length: f64, max_j: usize) -> Vec<f64> {
    let w = PI / length;
    (0..=max_j)
        .map(|j| {
            pieces
                .iter()
                .map(|p| linear_cosine_moment(p, j as f64 * w))
                .sum::<f64>()
                / length
        })
        .collect()
}

fn cosine_moment_numeric(f: &dyn Fn(f64) -> f64, knots: &[f64], q: f64, refine: usize) -> f64 {
    let (nodes, weights) = gl8();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        // One panel per oscillation wavelength, at least one per knot interval.
        let per_wave = 1 + ((b - a) * q / (2.0 * PI)).ceil() as usize;
        let panels = per_wave * refine;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut s = 0.0;
            for (x, wt) in nodes.iter().zip(weights) {
                let x = mid + 0.5 * h * x;
                s += wt * f(x) * (q * x).cos();
            }
            total += 0.5 * h * s;
        }
    }
    total
}

/// Cosine moments by panel Gauss–Legendre quadrature, refined until two
/// successive refinements agree to `tolerance`.
pub(crate) fn cosine_moments_numeric(
    p: &EmbeddedPotential,
    max_j: usize,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let length = p.length();
    let knots = p.knots();
    let f = |x: f64| p.value(x);
    let w = PI / length;
    (0..=max_j)
        .map(|j| {
            let q = j as f64 * w;
            let mut refine = 1;
            let mut prev = cosine_moment_numeric(&f, &knots, q, refine) / length;
            loop {
                refine *= 2;
                let next = cosine_moment_numeric(&f, &knots, q, refine) / length;
                let err = (next - prev).abs();
                if err <= tolerance {
                    return Ok(next);
                }
                if refine >= MAX_REFINEMENT {
                    return Err(Error::QuadratureNotConverged {
                        achieved: err,
                        wanted: tolerance,
                    });
                }
                prev = next;
            }
        })
        .collect()
}

/// `V_km` for a potential without exact pieces (e.g. a spline table).
pub fn matrix_element_sampled(p: &EmbeddedPotential, k: usize, m: usize) -> Result<f64> {
    if k == 0 || m == 0 {
        return Err(Error::invalid("basis indices start at 1"));
    }
    let c = cosine_moments_numeric(p, k + m, SAMPLED_TOLERANCE / 2.0)?;
    Ok(c[k.abs_diff(m)] - c[k + m])
}
