use super::{well_structure, PiecewisePotential, Potential, DEFAULT_PROMINENCE};
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// How [`approximate_piecewise`] builds its segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApproxMode {
    /// One constant segment per well, per barrier and per edge, at the mean
    /// height of the profile over the segment.
    Coarse,
    /// Continuous piecewise-linear interpolation, refined by bisecting the
    /// worst segment until the deviation drops below `tolerance` (in `E0`).
    Fine { tolerance: f64 },
}

/// Approximates a smooth profile by a piecewise potential of at most
/// `budget` segments.
///
/// Both modes need at least `2·wells + 1` segments: an edge segment on each
/// side plus a segment per well and per barrier.
pub fn approximate_piecewise(
    p: &dyn Potential,
    mode: ApproxMode,
    budget: usize,
) -> Result<PiecewisePotential> {
    let wells = well_structure(p, DEFAULT_PROMINENCE)?;
    let required = 2 * wells.minima.len() + 1;
    if budget < required {
        return Err(Error::BudgetTooSmall { budget, required });
    }
    let (start, end) = p.domain();

    // Edge, well, barrier, ..., well, edge.
    let mut extrema = vec![(start, p.value(start))];
    for (i, &m) in wells.minima.iter().enumerate() {
        extrema.push(m);
        if let Some(&b) = wells.barriers.get(i) {
            extrema.push(b);
        }
    }
    extrema.push((end, p.value(end)));

    match mode {
        ApproxMode::Coarse => coarse(p, &extrema),
        ApproxMode::Fine { tolerance } => {
            if !(tolerance > 0.0) {
                return Err(Error::invalid("fine tolerance must be positive"));
            }
            fine(p, &extrema, tolerance, budget)
        }
    }
}

fn coarse(p: &dyn Potential, extrema: &[(f64, f64)]) -> Result<PiecewisePotential> {
    let mut breaks = vec![extrema[0].0];
    for w in extrema.windows(2) {
        let ((x0, v0), (x1, v1)) = (w[0], w[1]);
        breaks.push(crossing(p, x0, x1, 0.5 * (v0 + v1)));
    }
    breaks.push(extrema[extrema.len() - 1].0);
    let values = breaks
        .windows(2)
        .map(|w| integrate(|x| p.value(x), w[0], w[1], 64) / (w[1] - w[0]))
        .collect();
    PiecewisePotential::constant(breaks, values)
}

/// Where `p` crosses `level` between `lo` and `hi`; the midpoint if it doesn't.
fn crossing(p: &dyn Potential, lo: f64, hi: f64, level: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let fa = p.value(a) - level;
    let fb = p.value(b) - level;
    if fa.signum() == fb.signum() {
        return 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (p.value(m) - level).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

fn fine(
    p: &dyn Potential,
    extrema: &[(f64, f64)],
    tolerance: f64,
    budget: usize,
) -> Result<PiecewisePotential> {
    let (start, end) = (extrema[0].0, extrema[extrema.len() - 1].0);
    let m = 10 * p.resolution();
    let check: Vec<(f64, f64)> = (0..=m)
        .map(|i| {
            let x = start + (end - start) * i as f64 / m as f64;
            (x, p.value(x))
        })
        .collect();

    let mut breaks: Vec<f64> = extrema.iter().map(|e| e.0).collect();
    breaks.dedup();
    let deviation = |a: f64, b: f64| -> f64 {
        let (va, vb) = (p.value(a), p.value(b));
        let lo = check.partition_point(|c| c.0 < a);
        check[lo..]
            .iter()
            .take_while(|c| c.0 <= b)
            .map(|&(x, v)| (va + (vb - va) * (x - a) / (b - a) - v).abs())
            .fold(0.0, f64::max)
    };
    let mut dev: Vec<f64> = breaks.windows(2).map(|w| deviation(w[0], w[1])).collect();

    while breaks.len() - 1 < budget {
        let (worst, &d) = dev
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one segment");
        if d <= tolerance {
            break;
        }
        let (a, b) = (breaks[worst], breaks[worst + 1]);
        let mid = 0.5 * (a + b);
        breaks.insert(worst + 1, mid);
        dev.splice(worst..=worst, [deviation(a, mid), deviation(mid, b)]);
    }
    let values = breaks.iter().map(|&x| p.value(x)).collect();
    PiecewisePotential::linear(breaks, values)
}
