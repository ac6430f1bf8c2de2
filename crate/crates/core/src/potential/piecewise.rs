use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// One height per segment.
    Constant,
    /// Continuous, linear between breakpoints; one value per breakpoint.
    Linear,
}

/// `V(x) = alpha + beta·x` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LinearPiece {
    pub fn constant(a: f64, b: f64, v: f64) -> Self {
        Self {
            a,
            b,
            alpha: v,
            beta: 0.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.alpha + self.beta * x
    }
}

/// Piecewise potential over contiguous segments `[breakpoints[i], breakpoints[i+1])`.
///
/// Outside the breakpoint range the edge values are held. Constant-shape
/// potentials may have their steps smoothed over a width `smoothing` with a
/// `tanh` profile; `0` keeps them sharp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePotential {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    shape: Shape,
    #[serde(default)]
    smoothing: f64,
}

impl PiecewisePotential {
    pub fn constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::build(breakpoints, values, Shape::Constant, 0.0)
    }

    pub fn linear(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::build(breakpoints, values, Shape::Linear, 0.0)
    }

    pub fn build(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        shape: Shape,
        smoothing: f64,
    ) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::invalid(
                "piecewise potential needs at least one segment",
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        let expected = match shape {
            Shape::Constant => breakpoints.len() - 1,
            Shape::Linear => breakpoints.len(),
        };
        if values.len() != expected {
            return Err(Error::invalid(format!(
                "{:?} shape with {} breakpoints needs {expected} values, got {}",
                shape,
                breakpoints.len(),
                values.len()
            )));
        }
        if values.iter().chain(&breakpoints).any(|v| !v.is_finite()) {
            return Err(Error::invalid("piecewise values must be finite"));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid("smoothing width must be >= 0"));
        }
        if smoothing > 0.0 && shape == Shape::Linear {
            return Err(Error::invalid(
                "smoothing applies to constant segments only",
            ));
        }
        Ok(Self {
            breakpoints,
            values,
            shape,
            smoothing,
        })
    }

    /// Same segments with `tanh` steps of the given width.
    pub fn with_smoothing(self, width: f64) -> Result<Self> {
        Self::build(self.breakpoints, self.values, self.shape, width)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn n_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    pub fn segment(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    /// Height of a constant segment.
    pub fn segment_value(&self, i: usize) -> Option<f64> {
        (self.shape == Shape::Constant)
            .then(|| self.values.get(i).copied())
            .flatten()
    }

    /// Copy with one constant segment set to a new height.
    pub fn with_segment_value(&self, i: usize, v: f64) -> Result<Self> {
        if self.shape != Shape::Constant || i >= self.n_segments() {
            return Err(Error::invalid(format!("no constant segment {i}")));
        }
        if !v.is_finite() {
            return Err(Error::invalid("segment height must be finite"));
        }
        let mut out = self.clone();
        out.values[i] = v;
        Ok(out)
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.n_segments();
        self.breakpoints
            .partition_point(|&b| b <= x)
            .saturating_sub(1)
            .min(n - 1)
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.shape {
            Shape::Constant if self.smoothing > 0.0 => {
                let mut v = self.values[0];
                for i in 1..self.n_segments() {
                    v += (self.values[i] - self.values[i - 1]) * self.step(i, x);
                }
                v
            }
            Shape::Constant => self.values[self.locate(x)],
            Shape::Linear => {
                if x <= self.start() {
                    return self.values[0];
                }
                if x >= self.end() {
                    return *self.values.last().expect("non-empty");
                }
                let i = self.locate(x);
                let (a, b) = self.segment(i);
                let t = (x - a) / (b - a);
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
        }
    }

    /// Smoothed unit step rising at interior breakpoint `i`.
    fn step(&self, i: usize, x: f64) -> f64 {
        0.5 * (1.0 + ((x - self.breakpoints[i]) / self.smoothing).tanh())
    }

    /// `∂V(x)/∂(height of segment s)` for constant shapes. Because `V` is linear
    /// in the heights, `V = Σ_s height_s · weight_s(x)`.
    pub fn segment_weight(&self, s: usize, x: f64) -> f64 {
        let n = self.n_segments();
        if self.smoothing > 0.0 {
            let left = if s == 0 { 1.0 } else { self.step(s, x) };
            let right = if s + 1 == n { 0.0 } else { self.step(s + 1, x) };
            left - right
        } else if self.locate(x) == s {
            1.0
        } else {
            0.0
        }
    }

    /// Exact linear pieces covering `[start, end]`, or `None` when smoothed.
    pub fn pieces(&self) -> Option<Vec<LinearPiece>> {
        if self.smoothing > 0.0 {
            return None;
        }
        Some(
            (0..self.n_segments())
                .map(|i| {
                    let (a, b) = self.segment(i);
                    match self.shape {
                        Shape::Constant => LinearPiece::constant(a, b, self.values[i]),
                        Shape::Linear => {
                            let beta = (self.values[i + 1] - self.values[i]) / (b - a);
                            LinearPiece {
                                a,
                                b,
                                alpha: self.values[i] - beta * a,
                                beta,
                            }
                        }
                    }
                })
                .collect(),
        )
    }

    /// Interior constant segments higher than both neighbours, left to right.
    pub fn barrier_segments(&self) -> Vec<usize> {
        if self.shape != Shape::Constant {
            return Vec::new();
        }
        (1..self.n_segments().saturating_sub(1))
            .filter(|&i| self.values[i] > self.values[i - 1] && self.values[i] > self.values[i + 1])
            .collect()
    }

    /// Points where quadrature should place panel edges.
    pub(crate) fn knots(&self) -> Vec<f64> {
        if self.smoothing > 0.0 {
            let w = self.smoothing;
            let mut k: Vec<f64> = vec![self.start(), self.end()];
            for &b in &self.breakpoints[1..self.breakpoints.len() - 1] {
                k.extend((-8..=8).map(|j| b + j as f64 * 0.75 * w));
            }
            k
        } else {
            self.breakpoints.clone()
        }
    }
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
    fn constant_segment_midpoint() {
        let p = PiecewisePotential::constant(vec![0.0, 1.0, 2.0], vec![4.0, 1.0]).unwrap();
        assert_eq!(p.value(0.5), 4.0);
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.value(-3.0), 4.0);
        assert_eq!(p.value(9.0), 1.0);
    }

    #[test]
    fn linear_interpolates() {
        let p = PiecewisePotential::linear(vec![0.0, 2.0, 3.0], vec![0.0, 4.0, 1.0]).unwrap();
        assert_eq!(p.value(1.0), 2.0);
        assert!((p.value(2.5) - 2.5).abs() < 1e-15);
        let pieces = p.pieces().unwrap();
        assert!((pieces[1].value(2.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn weights_reconstruct_value() {
        for p in [triple(), triple().with_smoothing(0.3).unwrap()] {
            for i in 0..300 {
                let x = -1.0 + i as f64 * 0.057;
                let v: f64 = (0..p.n_segments())
                    .map(|s| p.values()[s] * p.segment_weight(s, x))
                    .sum();
                assert!((v - p.value(x)).abs() < 1e-12, "{x}");
            }
        }
    }

    #[test]
    fn smoothing_is_local() {
        let p = triple().with_smoothing(0.2).unwrap();
        assert!(p.value(3.5).abs() < 1e-4);
        assert!((p.value(5.0) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn finds_barriers() {
        assert_eq!(triple().barrier_segments(), vec![2, 4]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PiecewisePotential::constant(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewisePotential::constant(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(PiecewisePotential::constant(vec![0.0, 1.0], vec![f64::NAN]).is_err());
    }
}
