//! Spatial grid, wavefunction samples and the observables shared by every solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::spectral::SineSpectrum;

/// Uniform grid of `n_points` samples covering `[offset, offset + length)`.
///
/// The first node sits on the left wall of the box and the right wall is the
/// (implicit) node `offset + length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_points: usize,
    pub length: f64,
    pub spacing: f64,
    pub offset: f64,
}

impl Grid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        Self::with_offset(n_points, length, 0.0)
    }

    pub fn with_offset(n_points: usize, length: f64, offset: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid size {n_points} is not a power of 2"
            )));
        }
        if !(length > 0.0 && length.is_finite() && offset.is_finite()) {
            return Err(Error::invalid("grid length must be positive and finite"));
        }
        Ok(Self {
            n_points,
            length,
            spacing: length / n_points as f64,
            offset,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.offset + i as f64 * self.spacing
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    pub fn end(&self) -> f64 {
        self.offset + self.length
    }
}

/// Complex wavefunction sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl WaveState {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(Error::invalid(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.n_points
            )));
        }
        Ok(Self {
            grid,
            amplitudes,
            time: 0.0,
        })
    }

    /// Samples a real function on the grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let amplitudes = grid.xs().map(|x| Complex64::new(f(x), 0.0)).collect();
        Self {
            grid,
            amplitudes,
            time: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    /// Rescales to unit norm. A zero state is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let n = norm(&self);
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
        self
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩` by the rectangle rule.
    pub fn overlap(&self, other: &WaveState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.spacing
    }
}

/// L2 norm `sqrt(Σ|ψ_i|²·dx)`.
pub fn norm(state: &WaveState) -> f64 {
    let sum: f64 = state.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    (sum * state.grid.spacing).sqrt()
}

/// Result of [`energy_expectation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyExpectation {
    /// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩` in `E0`.
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Set when the input norm deviates from 1 by more than `1e-6`.
    pub not_normalized: bool,
}

/// `⟨ψ| -d²/dξ² + v(ξ) |ψ⟩` with the kinetic part taken from the sine spectrum.
pub fn energy_expectation(state: &WaveState, potential: &dyn Potential) -> EnergyExpectation {
    let grid = &state.grid;
    let n = grid.n_points;
    let mut spectrum = SineSpectrum::new(n);
    spectrum.forward(&state.amplitudes);
    let ks = SineSpectrum::wavenumbers(n, grid.length);
    let (mut power, mut kin) = (0.0, 0.0);
    for (y, k) in spectrum.buf.iter().zip(&ks) {
        let p = y.norm_sqr();
        power += p;
        kin += p * k * k;
    }
    let norm_sq = norm(state).powi(2);
    let kinetic = if power > 0.0 { kin / power } else { 0.0 };
    let mut pot = 0.0;
    for (i, a) in state.amplitudes.iter().enumerate().skip(1) {
        let p = a.norm_sqr();
        if p > 0.0 {
            pot += potential.value(grid.x(i)) * p;
        }
    }
    let sampled = norm_sq / grid.spacing;
    let potential_part = if sampled > 0.0 { pot / sampled } else { 0.0 };
    EnergyExpectation {
        energy: kinetic + potential_part,
        kinetic,
        potential: potential_part,
        not_normalized: (norm_sq.sqrt() - 1.0).abs() > 1e-6,
    }
}

/// Probability inside each region.
///
/// Sample `i` stands for the cell `[x_i, x_i + dx)`; a region boundary inside a
/// cell takes the overlapping fraction of that cell.
pub fn dot_probabilities(state: &WaveState, regions: &[(f64, f64)]) -> Result<Vec<f64>> {
    let grid = &state.grid;
    let tol = 1e-9 * grid.length;
    let mut sorted: Vec<(f64, f64)> = regions.to_vec();
    for &(a, b) in &sorted {
        if !(a < b) {
            return Err(Error::invalid(format!("empty region [{a}, {b}]")));
        }
        if a < grid.offset - tol || b > grid.end() + tol {
            return Err(Error::invalid(format!(
                "region [{a}, {b}] outside grid [{}, {}]",
                grid.offset,
                grid.end()
            )));
        }
    }
    sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
    if sorted.windows(2).any(|w| w[1].0 < w[0].1 - tol) {
        return Err(Error::invalid("regions overlap"));
    }

    let dx = grid.spacing;
    let density = state.density();
    Ok(regions
        .iter()
        .map(|&(a, b)| {
            let u0 = ((a - grid.offset) / dx).max(0.0);
            let u1 = ((b - grid.offset) / dx).min(grid.n_points as f64);
            if u1 <= u0 {
                return 0.0;
            }
            let first = u0.floor() as usize;
            let last = (u1.ceil() as usize).min(grid.n_points);
            (first..last)
                .map(|i| {
                    let lo = u0.max(i as f64);
                    let hi = u1.min(i as f64 + 1.0);
                    density[i] * (hi - lo).max(0.0)
                })
                .sum::<f64>()
                * dx
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: Grid, center: f64, sigma: f64) -> WaveState {
        WaveState::from_fn(grid, |x| {
            (-(x - center).powi(2) / (4.0 * sigma * sigma)).exp()
                / (2.0 * PI * sigma * sigma).powf(0.25)
        })
    }

    struct Flat;
    impl Potential for Flat {
        fn value(&self, _x: f64) -> f64 {
            0.0
        }
        fn domain(&self) -> (f64, f64) {
            (0.0, 10.0)
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(500, 1.0).is_err());
        assert!(Grid::new(512, 1.0).is_ok());
    }

    #[test]
    fn zero_state_has_zero_norm() {
        let g = Grid::new(16, 1.0).unwrap();
        let s = WaveState::new(g, vec![Complex64::new(0.0, 0.0); 16]).unwrap();
        assert_eq!(norm(&s), 0.0);
    }

    #[test]
    fn gaussian_is_normalized() {
        let g = Grid::new(512, 20.0).unwrap();
        let s = gaussian(g, 10.0, 1.0);
        assert!((norm(&s) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discrete_delta() {
        let g = Grid::new(64, 2.0).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 64];
        amps[10] = Complex64::new(1.0 / g.spacing.sqrt(), 0.0);
        let s = WaveState::new(g, amps).unwrap();
        assert!((norm(&s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn infinite_well_levels() {
        let l = 10.0;
        let g = Grid::new(512, l).unwrap();
        for n in 1..=2 {
            let s = WaveState::from_fn(g, |x| (2.0 / l).sqrt() * (n as f64 * PI * x / l).sin());
            let e = energy_expectation(&s, &Flat);
            assert!((e.energy - (n as f64 * PI / l).powi(2)).abs() < 1e-6);
            assert!(!e.not_normalized);
        }
    }

    #[test]
    fn unnormalized_state_is_flagged() {
        let g = Grid::new(64, 1.0).unwrap();
        let s = WaveState::from_fn(g, |x| 3.0 * (PI * x).sin());
        assert!(energy_expectation(&s, &Flat).not_normalized);
    }

    #[test]
    fn localized_state_probabilities() {
        let g = Grid::new(256, 30.0).unwrap();
        let s = gaussian(g, 5.0, 0.5);
        let p = dot_probabilities(&s, &[(0.0, 10.0), (10.0, 20.0), (20.0, 30.0)]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
        assert!(p[1].abs() < 1e-9 && p[2].abs() < 1e-9);
    }

    #[test]
    fn symmetric_split() {
        let g = Grid::new(512, 30.0).unwrap();
        let a = gaussian(g, 5.0, 0.5);
        let b = gaussian(g, 15.0, 0.5);
        let amps = a
            .amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x + y) / 2f64.sqrt())
            .collect();
        let s = WaveState::new(g, amps).unwrap();
        let p = dot_probabilities(&s, &[(0.0, 10.0), (10.0, 20.0), (20.0, 30.0)]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-6 && (p[1] - 0.5).abs() < 1e-6 && p[2].abs() < 1e-6);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let g = Grid::new(64, 10.0).unwrap();
        let s = gaussian(g, 5.0, 1.0);
        assert!(dot_probabilities(&s, &[(0.0, 6.0), (5.0, 10.0)]).is_err());
        assert!(dot_probabilities(&s, &[(0.0, 11.0)]).is_err());
    }
}
