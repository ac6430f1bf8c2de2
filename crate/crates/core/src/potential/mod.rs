//! One-dimensional potential energy profiles, in `x0` / `E0` units.

mod approx;
mod piecewise;
mod sampled;
mod schedule;
mod spline;

pub use approx::{approximate_piecewise, ApproxMode};
pub use piecewise::{LinearPiece, PiecewisePotential, Shape};
pub use sampled::{load_potential_table, write_potential_table, SampledPotential};
pub use schedule::{BarrierModulation, BarrierSchedule, StepFunction};
pub use spline::CubicSpline;

use crate::error::{Error, Result};

/// Value returned for points outside an infinite well.
pub const HARD_WALL: f64 = f64::INFINITY;

/// Minimum depth a dip must have to count as a well, in `E0`.
pub const DEFAULT_PROMINENCE: f64 = 0.5;

/// A static potential energy profile.
pub trait Potential: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// Interval on which the profile is defined.
    fn domain(&self) -> (f64, f64);

    /// Number of samples that resolve the profile's features.
    fn resolution(&self) -> usize {
        400
    }
}

/// A potential that may depend on time.
pub trait TimePotential {
    fn value_at(&self, x: f64, t: f64) -> f64;
}

impl<P: Potential> TimePotential for P {
    fn value_at(&self, x: f64, _t: f64) -> f64 {
        self.value(x)
    }
}

/// Potential value at `(x, t)` for any representation.
pub fn evaluate(p: &dyn TimePotential, x: f64, t: f64) -> f64 {
    p.value_at(x, t)
}

impl Potential for SampledPotential {
    fn value(&self, x: f64) -> f64 {
        SampledPotential::value(self, x)
    }

    fn domain(&self) -> (f64, f64) {
        (self.start(), self.end())
    }

    fn resolution(&self) -> usize {
        self.xs().len().max(400)
    }
}

impl Potential for PiecewisePotential {
    fn value(&self, x: f64) -> f64 {
        PiecewisePotential::value(self, x)
    }

    fn domain(&self) -> (f64, f64) {
        (self.start(), self.end())
    }
}

/// The finite potential placed inside an infinite well.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerPotential {
    Empty,
    Sampled(SampledPotential),
    Piecewise(PiecewisePotential),
}

impl InnerPotential {
    /// `(start, end)` of the inner profile in its own coordinates.
    pub fn range(&self) -> (f64, f64) {
        match self {
            InnerPotential::Empty => (0.0, 0.0),
            InnerPotential::Sampled(p) => (p.start(), p.end()),
            InnerPotential::Piecewise(p) => (p.start(), p.end()),
        }
    }

    pub fn extent(&self) -> f64 {
        let (a, b) = self.range();
        b - a
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            InnerPotential::Empty => 0.0,
            InnerPotential::Sampled(p) => p.value(x),
            InnerPotential::Piecewise(p) => p.value(x),
        }
    }
}

impl From<SampledPotential> for InnerPotential {
    fn from(p: SampledPotential) -> Self {
        InnerPotential::Sampled(p)
    }
}

impl From<PiecewisePotential> for InnerPotential {
    fn from(p: PiecewisePotential) -> Self {
        InnerPotential::Piecewise(p)
    }
}

/// Inner potential centred in a hard-walled box `[0, length]`.
///
/// Between the walls and the inner profile the edge values of the profile are
/// held constant, forming the plateau that decides which states are bound.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPotential {
    inner: InnerPotential,
    margin: f64,
    length: f64,
    /// Box coordinate minus inner coordinate.
    shift: f64,
}

/// Centres `inner` in an infinite well of width `length`, at least `margin`
/// away from either wall.
pub fn embed_in_infinite_well(
    inner: impl Into<InnerPotential>,
    margin: f64,
    length: f64,
) -> Result<EmbeddedPotential> {
    let inner = inner.into();
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid("well width must be positive"));
    }
    if !(margin >= 0.0) {
        return Err(Error::invalid("margin must be non-negative"));
    }
    let extent = inner.extent();
    if extent + 2.0 * margin > length * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "well width {length} is smaller than extent {extent} plus two margins of {margin}"
        )));
    }
    let shift = match inner {
        InnerPotential::Empty => 0.0,
        _ => 0.5 * (length - extent) - inner.range().0,
    };
    Ok(EmbeddedPotential {
        inner,
        margin,
        length,
        shift,
    })
}

impl EmbeddedPotential {
    /// An empty infinite well.
    pub fn infinite_well(length: f64) -> Result<Self> {
        embed_in_infinite_well(InnerPotential::Empty, 0.0, length)
    }

    pub fn inner(&self) -> &InnerPotential {
        &self.inner
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Offset between box and inner coordinates.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `(start, end)` of the inner profile in box coordinates.
    pub fn inner_range(&self) -> (f64, f64) {
        let (a, b) = self.inner.range();
        (a + self.shift, b + self.shift)
    }

    /// Same placement with a different inner profile of equal range.
    pub fn with_inner(&self, inner: impl Into<InnerPotential>) -> Result<Self> {
        let inner = inner.into();
        if inner.range() != self.inner.range() {
            return Err(Error::invalid(
                "replacement inner potential has a different range",
            ));
        }
        Ok(Self {
            inner,
            ..self.clone()
        })
    }

    /// Plateau values next to the left and right walls.
    pub fn plateau(&self) -> (f64, f64) {
        (self.value(0.0), self.value(self.length))
    }

    /// States below this energy are counted as bound: the lower plateau, or
    /// every state for an empty well.
    pub fn default_bound_threshold(&self) -> f64 {
        match self.inner {
            InnerPotential::Empty => f64::INFINITY,
            _ => {
                let (l, r) = self.plateau();
                l.min(r)
            }
        }
    }

    /// Exact linear pieces tiling `[0, length]` when the profile is piecewise linear.
    pub fn linear_pieces(&self) -> Option<Vec<LinearPiece>> {
        let l = self.length;
        let inner = match &self.inner {
            InnerPotential::Empty => return Some(vec![LinearPiece::constant(0.0, l, 0.0)]),
            InnerPotential::Sampled(_) => return None,
            InnerPotential::Piecewise(p) => p.pieces()?,
        };
        let (start, end) = self.inner_range();
        let mut out = Vec::with_capacity(inner.len() + 2);
        if start > 0.0 {
            out.push(LinearPiece::constant(0.0, start, self.value(0.0)));
        }
        out.extend(inner.into_iter().map(|p| LinearPiece {
            a: p.a + self.shift,
            b: p.b + self.shift,
            alpha: p.alpha - p.beta * self.shift,
            beta: p.beta,
        }));
        if end < l {
            out.push(LinearPiece::constant(end, l, self.value(l)));
        }
        Some(out)
    }

    /// Sorted panel edges in `[0, length]` for quadrature.
    pub(crate) fn knots(&self) -> Vec<f64> {
        let inner: Vec<f64> = match &self.inner {
            InnerPotential::Empty => Vec::new(),
            InnerPotential::Sampled(p) => p.xs().to_vec(),
            InnerPotential::Piecewise(p) => p.knots(),
        };
        let mut k: Vec<f64> = inner
            .into_iter()
            .map(|x| x + self.shift)
            .filter(|&x| x > 0.0 && x < self.length)
            .collect();
        k.push(0.0);
        k.push(self.length);
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        k
    }
}

impl Potential for EmbeddedPotential {
    fn value(&self, x: f64) -> f64 {
        if !(0.0..=self.length).contains(&x) {
            return HARD_WALL;
        }
        self.inner.value(x - self.shift)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.length)
    }

    fn resolution(&self) -> usize {
        let base = match &self.inner {
            InnerPotential::Sampled(p) => p.xs().len(),
            _ => 0,
        };
        let scale = if self.inner.extent() > 0.0 {
            self.length / self.inner.extent()
        } else {
            1.0
        };
        ((base as f64 * scale) as usize).max(400)
    }
}

/// Wells and the barriers between them.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WellStructure {
    /// `(x, V)` of each well bottom, left to right.
    pub minima: Vec<(f64, f64)>,
    /// `(x, V)` of the highest point between consecutive wells.
    pub barriers: Vec<(f64, f64)>,
}

/// Finds wells as strict local minima (flat bottoms allowed) of `p` sampled at
/// ten times its natural resolution, keeping those with at least `prominence`.
pub(crate) fn well_structure(p: &dyn Potential, prominence: f64) -> Result<WellStructure> {
    let (a, b) = p.domain();
    let n = 10 * p.resolution();
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| p.value(x)).collect();

    // Runs of equal samples: (first index, last index, value).
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in vs.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.2 == v => r.1 = i,
            _ => runs.push((i, i, v)),
        }
    }
    let center = |r: &(usize, usize, f64)| 0.5 * (xs[r.0] + xs[r.1]);

    let mut minima = Vec::new();
    for r in 1..runs.len().saturating_sub(1) {
        let v = runs[r].2;
        if !(runs[r - 1].2 > v && runs[r + 1].2 > v) {
            continue;
        }
        let mut left_max = v;
        for q in (0..r).rev() {
            if runs[q].2 < v {
                break;
            }
            left_max = left_max.max(runs[q].2);
        }
        let mut right_max = v;
        for run in &runs[r + 1..] {
            if run.2 < v {
                break;
            }
            right_max = right_max.max(run.2);
        }
        if left_max.min(right_max) - v >= prominence {
            minima.push(r);
        }
    }
    if minima.is_empty() {
        return Err(Error::NoWells);
    }

    let barriers = minima
        .windows(2)
        .map(|w| {
            let top = (w[0] + 1..w[1])
                .max_by(|&i, &j| runs[i].2.total_cmp(&runs[j].2))
                .expect("a maximum lies between two minima");
            (center(&runs[top]), runs[top].2)
        })
        .collect();
    Ok(WellStructure {
        minima: minima
            .iter()
            .map(|&r| (center(&runs[r]), runs[r].2))
            .collect(),
        barriers,
    })
}

/// One interval per well, split at the barrier tops and bounded by the ends
/// of the domain (the walls, for an embedded potential).
pub fn segment_dots(p: &dyn Potential) -> Result<Vec<(f64, f64)>> {
    segment_dots_with(p, DEFAULT_PROMINENCE)
}

pub fn segment_dots_with(p: &dyn Potential, prominence: f64) -> Result<Vec<(f64, f64)>> {
    let wells = well_structure(p, prominence)?;
    let (a, b) = p.domain();
    let mut edges = vec![a];
    edges.extend(wells.barriers.iter().map(|&(x, _)| x));
    edges.push(b);
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple() -> PiecewisePotential {
        PiecewisePotential::constant(
            vec![0.0, 2.0, 5.0, 6.0, 9.0, 10.0, 13.0, 15.0],
            vec![64.0, 0.0, 20.0, 0.0, 20.0, 0.0, 64.0],
        )
        .unwrap()
    }

    #[test]
    fn empty_inner_is_pure_well() {
        let p = EmbeddedPotential::infinite_well(7.0).unwrap();
        assert_eq!(p.value(3.0), 0.0);
        assert_eq!(p.value(-0.1), HARD_WALL);
        assert_eq!(p.value(7.1), HARD_WALL);
        assert_eq!(p.default_bound_threshold(), f64::INFINITY);
    }

    #[test]
    fn centred_with_equal_margins() {
        let inner = PiecewisePotential::constant(vec![0.0, 30.0], vec![1.0]).unwrap();
        let p = embed_in_infinite_well(inner, 7.236, 44.472).unwrap();
        let (s, e) = p.inner_range();
        assert!((s - 7.236).abs() < 1e-12);
        assert!((44.472 - e - 7.236).abs() < 1e-12);
    }

    #[test]
    fn too_small_well_rejected() {
        let inner = PiecewisePotential::constant(vec![0.0, 30.0], vec![1.0]).unwrap();
        assert!(embed_in_infinite_well(inner, 8.0, 44.472).is_err());
    }

    #[test]
    fn margins_hold_edge_values() {
        let p = embed_in_infinite_well(triple(), 2.0, 20.0).unwrap();
        assert_eq!(p.value(0.5), 64.0);
        assert_eq!(p.value(19.5), 64.0);
        assert_eq!(p.default_bound_threshold(), 64.0);
        let pieces = p.linear_pieces().unwrap();
        assert_eq!(pieces.first().unwrap().a, 0.0);
        assert_eq!(pieces.last().unwrap().b, 20.0);
        for w in pieces.windows(2) {
            assert_eq!(w[0].b, w[1].a);
        }
        for q in &pieces {
            let mid = 0.5 * (q.a + q.b);
            assert!((q.value(mid) - p.value(mid)).abs() < 1e-12);
        }
    }

    #[test]
    fn knot_is_exact_for_spline() {
        let p = SampledPotential::from_fn(0.0, 4.0, 9, |x| x * x).unwrap();
        assert_eq!(evaluate(&p, 1.5, 0.0), 2.25);
    }

    #[test]
    fn triple_well_segments() {
        let p = embed_in_infinite_well(triple(), 2.5, 20.0).unwrap();
        let dots = segment_dots(&p).unwrap();
        assert_eq!(dots.len(), 3);
        assert_eq!(dots[0].0, 0.0);
        assert_eq!(dots[2].1, 20.0);
        // Middle dot is centred on the middle well.
        let mid = 0.5 * (dots[1].0 + dots[1].1);
        assert!((mid - 10.0).abs() < 0.05, "{mid}");
        assert!(dots.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn single_well_spans_domain() {
        let p = SampledPotential::from_fn(-3.0, 3.0, 100, |x| x * x).unwrap();
        assert_eq!(segment_dots(&p).unwrap(), vec![(-3.0, 3.0)]);
    }

    #[test]
    fn monotone_has_no_wells() {
        let p = SampledPotential::from_fn(0.0, 3.0, 100, |x| 2.0 * x).unwrap();
        assert!(matches!(segment_dots(&p), Err(Error::NoWells)));
    }

    #[test]
    fn shallow_ripples_ignored() {
        let p =
            SampledPotential::from_fn(-3.0, 3.0, 300, |x| x * x + 0.1 * (20.0 * x).sin()).unwrap();
        assert_eq!(segment_dots(&p).unwrap().len(), 1);
    }
}
