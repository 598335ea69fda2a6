//! Gaussian radial basis systems on equally spaced knots.
//!
//! A basis with `m` functions is laid out on `m + 4` equally spaced knots
//! `τ_0 < … < τ_{m+3}` with `τ_3 = t_min` and `τ_m = t_max`. Function `k`
//! is centered at `τ_{k+2}` and all functions share the width
//! `(τ_{k+2} − τ_k) / 3 = 2h / 3`, where `h` is the knot spacing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    knots: Vec<f64>,
    t_min: f64,
    t_max: f64,
    spacing: f64,
}

impl KnotGrid {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of basis functions this grid supports.
    pub fn basis_count(&self) -> usize {
        self.knots.len() - 4
    }
}

/// Places `m + 4` equally spaced knots so that knot 3 sits on `t_min` and
/// knot `m` on `t_max` (0-based).
pub fn place_knots(t_min: f64, t_max: f64, m: usize) -> Result<KnotGrid> {
    if m < 4 {
        return Err(Error::invalid(format!(
            "knot placement needs m >= 4, got {m}"
        )));
    }
    if !(t_min.is_finite() && t_max.is_finite()) || t_min >= t_max {
        return Err(Error::invalid(format!(
            "knot placement needs finite t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    let spacing = (t_max - t_min) / (m - 3) as f64;
    let mut knots: Vec<f64> = (0..m + 4)
        .map(|j| t_min + (j as f64 - 3.0) * spacing)
        .collect();
    knots[3] = t_min;
    knots[m] = t_max;
    Ok(KnotGrid {
        knots,
        t_min,
        t_max,
        spacing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBasis {
    centers: Vec<f64>,
    width: f64,
    grid: KnotGrid,
}

pub fn build_basis(grid: KnotGrid) -> GaussianBasis {
    let m = grid.basis_count();
    let centers = grid.knots[2..m + 2].to_vec();
    let width = 2.0 * grid.spacing / 3.0;
    GaussianBasis {
        centers,
        width,
        grid,
    }
}

impl GaussianBasis {
    /// Convenience for `build_basis(place_knots(t_min, t_max, m)?)`.
    pub fn on_range(t_min: f64, t_max: f64, m: usize) -> Result<Self> {
        Ok(build_basis(place_knots(t_min, t_max, m)?))
    }

    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    /// Writes `φ_k(t)` for every `k` into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let inv = 1.0 / (2.0 * self.width * self.width);
        for (o, &mu) in out.iter_mut().zip(&self.centers) {
            let d = t - mu;
            *o = (-d * d * inv).exp();
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        self.eval_into(t, out.as_mut_slice());
        out
    }

    /// `N × m` matrix whose row `i` is `φ(times[i])ᵀ`.
    pub fn design_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        if times.is_empty() {
            return Err(Error::invalid("design matrix needs at least one time point"));
        }
        let m = self.m();
        let mut row = vec![0.0; m];
        let mut phi = DMatrix::zeros(times.len(), m);
        for (i, &t) in times.iter().enumerate() {
            self.eval_into(t, &mut row);
            for (k, &v) in row.iter().enumerate() {
                phi[(i, k)] = v;
            }
        }
        Ok(phi)
    }

    /// Evaluates the expansion `Σ_k ω_k φ_k(t)`.
    pub fn evaluate_expansion(&self, coefficients: &[f64], t: f64) -> f64 {
        let inv = 1.0 / (2.0 * self.width * self.width);
        self.centers
            .iter()
            .zip(coefficients)
            .map(|(&mu, &w)| w * (-(t - mu) * (t - mu) * inv).exp())
            .sum()
    }
}

pub fn eval_basis(basis: &GaussianBasis, t: f64) -> DVector<f64> {
    basis.eval(t)
}

pub fn design_matrix(basis: &GaussianBasis, times: &[f64]) -> Result<DMatrix<f64>> {
    basis.design_matrix(times)
}

/// Roughness penalty `D₂ᵀD₂` for a coefficient sequence of length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    order: usize,
    matrix: DMatrix<f64>,
}

impl PenaltyMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `ωᵀ𝒦ω`, evaluated as the sum of squared second differences.
    pub fn quadratic_form(&self, omega: &[f64]) -> f64 {
        omega
            .windows(3)
            .map(|w| {
                let d = w[0] - 2.0 * w[1] + w[2];
                d * d
            })
            .sum()
    }
}

pub fn second_difference_penalty(m: usize) -> Result<PenaltyMatrix> {
    if m < 3 {
        return Err(Error::invalid(format!(
            "second-difference penalty needs m >= 3, got {m}"
        )));
    }
    let mut d2 = DMatrix::zeros(m - 2, m);
    for r in 0..m - 2 {
        d2[(r, r)] = 1.0;
        d2[(r, r + 1)] = -2.0;
        d2[(r, r + 2)] = 1.0;
    }
    Ok(PenaltyMatrix {
        order: 2,
        matrix: d2.transpose() * d2,
    })
}

/// `J_ij = ∫ φ_i(t) φ_j(t) dt` over the real line, in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossProductMatrix {
    matrix: DMatrix<f64>,
}

impl CrossProductMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Wraps an arbitrary square matrix. Only meant for test doubles and
    /// for reloading persisted models.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("cross-product matrix must be square"));
        }
        Ok(Self { matrix })
    }
}

pub fn cross_product_matrix(basis: &GaussianBasis) -> CrossProductMatrix {
    let m = basis.m();
    let eta2 = basis.width * basis.width;
    let scale = (std::f64::consts::PI * eta2).sqrt();
    let matrix = DMatrix::from_fn(m, m, |i, j| {
        let d = basis.centers[i] - basis.centers[j];
        scale * (-d * d / (4.0 * eta2)).exp()
    });
    CrossProductMatrix { matrix }
}
