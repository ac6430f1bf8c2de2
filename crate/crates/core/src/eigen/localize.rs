use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::matrix::{linear_cosine_moment, matrix_element_piecewise};
use super::{sample_coefficients, EigenSolution};
use crate::error::{Error, Result};
use crate::potential::LinearPiece;
use crate::wave::{Grid, WaveState};

const MAX_SWEEPS: usize = 200;

/// Lowest-band states rotated so each is concentrated in one well.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedBasis {
    /// Row `w` mixes the lowest eigenstates into the state of well `w`.
    pub rotation: DMatrix<f64>,
    /// Row `w` holds the sine-basis coefficients of the state of well `w`.
    pub coefficients: DMatrix<f64>,
    /// Probability of state `w` inside well `w`.
    pub localization: Vec<f64>,
    /// Energies of the lowest band.
    pub band: Vec<f64>,
}

impl LocalizedBasis {
    /// `U·diag(E)·Uᵀ`: on-site energies on the diagonal, minus the hopping off it.
    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let e = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.band.clone()));
        &self.rotation * e * self.rotation.transpose()
    }

    pub fn states(&self, sol: &EigenSolution, grid: &Grid) -> Result<Vec<WaveState>> {
        self.coefficients
            .row_iter()
            .map(|row| {
                let c: Vec<f64> = row.iter().copied().collect();
                let amps = sample_coefficients(&sol.basis, &c, grid)
                    .into_iter()
                    .map(|v| Complex64::new(v, 0.0))
                    .collect();
                WaveState::new(*grid, amps)
            })
            .collect()
    }
}

/// `S_km = (2/L)∫_a^b φ_k φ_m` restricted to the basis.
fn overlap_matrix(n: usize, length: f64, (a, b): (f64, f64)) -> Result<DMatrix<f64>> {
    let mut s = DMatrix::zeros(n, n);
    for k in 0..n {
        for m in k..n {
            let v = matrix_element_piecewise((a, b), 1.0, k + 1, m + 1, length)?;
            s[(k, m)] = v;
            s[(m, k)] = v;
        }
    }
    Ok(s)
}

fn position_matrix(n: usize, length: f64) -> DMatrix<f64> {
    let x = LinearPiece {
        a: 0.0,
        b: length,
        alpha: 0.0,
        beta: 1.0,
    };
    let w = PI / length;
    let moments: Vec<f64> = (0..=2 * n)
        .map(|j| linear_cosine_moment(&x, j as f64 * w) / length)
        .collect();
    DMatrix::from_fn(n, n, |i, j| moments[i.abs_diff(j)] - moments[i + j + 2])
}

fn check_wells(sol: &EigenSolution, wells: &[(f64, f64)]) -> Result<()> {
    if wells.is_empty() {
        return Err(Error::invalid("no wells given"));
    }
    if wells.len() > sol.n_bound {
        return Err(Error::TooFewBoundStates {
            available: sol.n_bound,
            wells: wells.len(),
        });
    }
    let l = sol.basis.length;
    for &(a, b) in wells {
        if !(a < b) || a < 0.0 || b > l * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "well [{a}, {b}] is not inside [0, {l}]"
            )));
        }
    }
    if wells.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::invalid(
            "wells must be disjoint and ordered left to right",
        ));
    }
    Ok(())
}

/// Rotates the lowest `wells.len()` eigenstates into one state per well,
/// maximizing the summed in-well probability by Jacobi sweeps.
pub fn localize(sol: &EigenSolution, wells: &[(f64, f64)]) -> Result<LocalizedBasis> {
    check_wells(sol, wells)?;
    let nw = wells.len();
    let n = sol.basis.n_basis;
    let l = sol.basis.length;
    let band = sol.coefficients.rows(0, nw).into_owned();

    let projectors: Vec<DMatrix<f64>> = wells
        .iter()
        .map(|&w| Ok(&band * overlap_matrix(n, l, w)? * band.transpose()))
        .collect::<Result<_>>()?;

    // Start from position eigenstates of the band, ordered left to right.
    let x = &band * position_matrix(n, l) * band.transpose();
    let eig = SymmetricEigen::new(x);
    let mut order: Vec<usize> = (0..nw).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut u = DMatrix::from_fn(nw, nw, |w, i| eig.eigenvectors[(i, order[w])]);

    for _ in 0..MAX_SWEEPS {
        let mut largest: f64 = 0.0;
        for a in 0..nw {
            for b in a + 1..nw {
                let ua = u.row(a).transpose();
                let ub = u.row(b).transpose();
                let (pa, pb) = (&projectors[a], &projectors[b]);
                let aa = ua.dot(&(pa * &ua));
                let ab = ua.dot(&(pa * &ub));
                let abb = ub.dot(&(pa * &ub));
                let ba = ua.dot(&(pb * &ua));
                let bab = ua.dot(&(pb * &ub));
                let bb = ub.dot(&(pb * &ub));
                let alpha = 0.5 * (aa - abb + bb - ba);
                let beta = ab - bab;
                let theta = 0.5 * beta.atan2(alpha);
                largest = largest.max(theta.abs());
                let (s, c) = theta.sin_cos();
                let ra = &ua * c + &ub * s;
                let rb = &ub * c - &ua * s;
                u.set_row(a, &ra.transpose());
                u.set_row(b, &rb.transpose());
            }
        }
        if largest < 1e-14 {
            break;
        }
    }

    let mut coefficients = &u * &band;
    let norm = (2.0 / l).sqrt();
    for (w, &(a, b)) in wells.iter().enumerate() {
        // Sign so the state integrates positive over its own well.
        let integral: f64 = (0..n)
            .map(|m| {
                let q = (m + 1) as f64 * PI / l;
                coefficients[(w, m)] * norm * ((q * a).cos() - (q * b).cos()) / q
            })
            .sum();
        if integral < 0.0 {
            for v in coefficients.row_mut(w).iter_mut() {
                *v = -*v;
            }
            for v in u.row_mut(w).iter_mut() {
                *v = -*v;
            }
        }
    }
    let localization = (0..nw)
        .map(|w| {
            let uw = u.row(w).transpose();
            uw.dot(&(&projectors[w] * &uw))
        })
        .collect();
    Ok(LocalizedBasis {
        rotation: u,
        coefficients,
        localization,
        band: sol.energies[..nw].to_vec(),
    })
}

/// One state per well, sampled on `grid`.
pub fn localized_states(
    sol: &EigenSolution,
    wells: &[(f64, f64)],
    grid: &Grid,
) -> Result<Vec<WaveState>> {
    localize(sol, wells)?.states(sol, grid)
}

/// The two lowest-band states carrying the most weight in wells `link.0`
/// and `link.1`, ascending.
pub fn find_doublet(
    sol: &EigenSolution,
    wells: &[(f64, f64)],
    link: (usize, usize),
) -> Result<(usize, usize)> {
    check_wells(sol, wells)?;
    let nw = wells.len();
    if link.0 >= nw || link.1 >= nw || link.0 == link.1 {
        return Err(Error::invalid(format!("bad well pair {link:?}")));
    }
    let n = sol.basis.n_basis;
    let l = sol.basis.length;
    let s = overlap_matrix(n, l, wells[link.0])? + overlap_matrix(n, l, wells[link.1])?;
    let mut weight: Vec<(usize, f64)> = (0..nw)
        .map(|i| {
            let c = sol.coefficients.row(i).transpose();
            (i, c.dot(&(&s * &c)))
        })
        .collect();
    weight.sort_by(|a, b| b.1.total_cmp(&a.1));
    if weight[1].1 < 0.5 {
        return Err(Error::Calibration(format!(
            "no doublet spans wells {} and {}",
            link.0 + 1,
            link.1 + 1
        )));
    }
    let (i, j) = (weight[0].0, weight[1].0);
    Ok((i.min(j), i.max(j)))
}
