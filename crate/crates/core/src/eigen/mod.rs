//! Bound states of an embedded potential in the infinite-well sine basis.

mod localize;
mod matrix;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::EmbeddedPotential;
use crate::wave::{Grid, WaveState};

pub use localize::{find_doublet, localize, localized_states, LocalizedBasis};
pub use matrix::{
    matrix_element_linear, matrix_element_piecewise, matrix_element_sampled, SAMPLED_TOLERANCE,
};

/// Truncated basis `φ_m(x) = sqrt(2/L)·sin(mπx/L)`, `m = 1..=n_basis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n_basis: usize,
    pub length: f64,
}

impl BasisSpec {
    pub fn new(n_basis: usize, length: f64) -> Result<Self> {
        if n_basis == 0 {
            return Err(Error::invalid("basis needs at least one function"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::invalid("basis width must be positive"));
        }
        Ok(Self { n_basis, length })
    }

    /// Free-well energy `(mπ/L)²` of basis function `m` (1-based).
    pub fn free_energy(&self, m: usize) -> f64 {
        (m as f64 * PI / self.length).powi(2)
    }

    /// `φ_1(x) .. φ_n(x)` into `out`; zero outside `[0, L]`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let l = self.length;
        if !(0.0..=l).contains(&x) {
            out.fill(0.0);
            return;
        }
        // sin(mθ) by the Chebyshev recurrence.
        let theta = PI * x / l;
        let c2 = 2.0 * theta.cos();
        let norm = (2.0 / l).sqrt();
        let (mut prev, mut cur) = (0.0, theta.sin());
        for o in out.iter_mut() {
            *o = norm * cur;
            let next = c2 * cur - prev;
            prev = cur;
            cur = next;
        }
    }
}

/// Spectrum and eigenvectors of the truncated Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Ascending eigenvalues in `E0`.
    pub energies: Vec<f64>,
    /// Row `n` holds the basis coefficients `c_nm` of state `n`.
    pub coefficients: DMatrix<f64>,
    pub n_bound: usize,
    pub basis: BasisSpec,
}

impl EigenSolution {
    pub fn bound_energies(&self) -> &[f64] {
        &self.energies[..self.n_bound]
    }

    /// `max |c·cᵀ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let c = &self.coefficients;
        let g = c * c.transpose();
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// `H_km = (kπ/L)²·δ_km + V_km`.
pub fn assemble_hamiltonian(p: &EmbeddedPotential, basis: &BasisSpec) -> Result<DMatrix<f64>> {
    let l = p.length();
    if (basis.length - l).abs() > 1e-12 * l {
        return Err(Error::invalid(format!(
            "basis width {} does not match well width {l}",
            basis.length
        )));
    }
    let n = basis.n_basis;
    let moments = match p.linear_pieces() {
        Some(pieces) => matrix::cosine_moments_exact(&pieces, l, 2 * n),
        None => matrix::cosine_moments_numeric(p, 2 * n, SAMPLED_TOLERANCE / 2.0)?,
    };
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let (k, m) = (i + 1, j + 1);
        let v = moments[k.abs_diff(m)] - moments[k + m];
        if k == m {
            basis.free_energy(k) + v
        } else {
            v
        }
    }))
}

/// Diagonalizes the full truncated Hamiltonian.
///
/// States below `bound_threshold` count as bound; `None` uses the lower
/// plateau of the embedding.
pub fn solve_bound_states(
    p: &EmbeddedPotential,
    basis: &BasisSpec,
    bound_threshold: Option<f64>,
) -> Result<EigenSolution> {
    let h = assemble_hamiltonian(p, basis)?;
    let eig = diagonalize(h)?;
    let threshold = bound_threshold.unwrap_or_else(|| p.default_bound_threshold());
    let n_bound = eig.0.iter().take_while(|&&e| e < threshold).count();
    Ok(EigenSolution {
        energies: eig.0,
        coefficients: eig.1,
        n_bound,
        basis: *basis,
    })
}

/// Ascending eigenvalues and eigenvectors as rows, sign-fixed so the largest
/// component of each row is positive.
pub(crate) fn diagonalize(h: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Hamiltonian has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut rows = DMatrix::zeros(n, n);
    for (r, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let lead = col
            .iter()
            .copied()
            .fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for m in 0..n {
            rows[(r, m)] = sign * col[m];
        }
    }
    Ok((energies, rows))
}

/// Real samples of a coefficient vector on `grid`.
pub(crate) fn sample_coefficients(basis: &BasisSpec, coeffs: &[f64], grid: &Grid) -> Vec<f64> {
    let mut phi = vec![0.0; basis.n_basis];
    grid.xs()
        .map(|x| {
            basis.eval_into(x, &mut phi);
            phi.iter().zip(coeffs).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// `ψ_n(x) = Σ_m c_nm·φ_m(x)` on `grid`.
pub fn reconstruct_wavefunction(sol: &EigenSolution, n: usize, grid: &Grid) -> Result<WaveState> {
    if n >= sol.n_bound {
        return Err(Error::invalid(format!(
            "state {n} is not bound ({} bound states)",
            sol.n_bound
        )));
    }
    let coeffs: Vec<f64> = sol.coefficients.row(n).iter().copied().collect();
    let amps = sample_coefficients(&sol.basis, &coeffs, grid)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    WaveState::new(*grid, amps)
}

/// Tunnel coupling `t_h = (E_j - E_i)/2` of a doublet `(i, j)`, `i < j`.
pub fn hopping_from_splitting(sol: &EigenSolution, (i, j): (usize, usize)) -> Result<f64> {
    if i >= j {
        return Err(Error::invalid(format!(
            "doublet indices ({i}, {j}) are not ascending"
        )));
    }
    if j >= sol.energies.len() {
        return Err(Error::invalid(format!("state {j} out of range")));
    }
    Ok(0.5 * (sol.energies[j] - sol.energies[i]))
}

/// `n,energy_E0,bound_flag` rows.
pub fn write_spectrum_csv(out: &mut impl Write, sol: &EigenSolution) -> std::io::Result<()> {
    writeln!(out, "n,energy_E0,bound_flag")?;
    for (n, e) in sol.energies.iter().enumerate() {
        writeln!(out, "{n},{e},{}", u8::from(n < sol.n_bound))?;
    }
    Ok(())
}

/// `x,re,im` rows.
pub fn write_wavefunction_csv(out: &mut impl Write, state: &WaveState) -> std::io::Result<()> {
    writeln!(out, "x,re,im")?;
    for (x, a) in state.grid.xs().zip(&state.amplitudes) {
        writeln!(out, "{x},{},{}", a.re, a.im)?;
    }
    Ok(())
}
