//! Penalized Gaussian-basis smoothing of individual curves and
//! functionalization of whole datasets.
//!
//! For one curve the estimator maximizes
//!
//! ```text
//! ℓ_ζ(ω, σ²) = −N/2 log(2πσ²) − ‖x − Φω‖² / (2σ²) − Nζ/2 ωᵀ𝒦ω
//! ```
//!
//! whose stationary point satisfies the coupled pair
//! `ω = (ΦᵀΦ + Nζσ²𝒦)⁻¹Φᵀx`, `σ² = ‖x − Φω‖²/N`. The pair is solved by
//! fixed-point iteration. Candidate `(m, ζ)` are scored by the smoothing GIC.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{second_difference_penalty, GaussianBasis};
use crate::error::{Error, Result};
use crate::grid::SmoothingGrid;
use crate::linalg::{condition_estimate, trace_q_rinv};

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_MAX_ITERS: usize = 100;
/// Iteration after which the tolerance is widened to the round-off level
/// of the penalized system.
const ROUNDOFF_CHECK_ITER: usize = 10;
const INIT_RIDGE: f64 = 1e-8;
const SIGMA2_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RawCurve {
    pub fn new(id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            times,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn time_range(&self) -> Option<(f64, f64)> {
        self.times.iter().fold(None, |acc, &t| match acc {
            None => Some((t, t)),
            Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SmoothFit {
    pub coefficients: DVector<f64>,
    pub noise_variance: f64,
    pub zeta: f64,
    pub basis: Arc<GaussianBasis>,
    pub gic: f64,
    pub fixed_point_iters: usize,
}

impl SmoothFit {
    pub fn m(&self) -> usize {
        self.basis.m()
    }
}

/// Per-curve quantities that do not depend on ζ, so a ζ grid only pays
/// for the Gram matrix once.
pub(crate) struct CurveSystem<'a> {
    basis: &'a Arc<GaussianBasis>,
    x: DVector<f64>,
    phi: DMatrix<f64>,
    gram: DMatrix<f64>,
    phit_x: DVector<f64>,
    penalty: DMatrix<f64>,
}

impl<'a> CurveSystem<'a> {
    pub(crate) fn new(curve: &RawCurve, basis: &'a Arc<GaussianBasis>) -> Result<Self> {
        let n = curve.len();
        let m = basis.m();
        if curve.values.len() != n {
            return Err(Error::invalid(format!(
                "curve has {} times but {} values",
                n,
                curve.values.len()
            )));
        }
        if n <= m {
            return Err(Error::invalid(format!(
                "curve has {n} observations, needs more than m = {m}"
            )));
        }
        if curve.values.iter().chain(&curve.times).any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve contains non-finite values"));
        }
        let phi = basis.design_matrix(&curve.times)?;
        let x = DVector::from_column_slice(&curve.values);
        let gram = phi.tr_mul(&phi);
        let phit_x = phi.tr_mul(&x);
        let penalty = second_difference_penalty(m)?.matrix().clone();
        Ok(Self {
            basis,
            x,
            phi,
            gram,
            phit_x,
            penalty,
        })
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    fn solve(&self, penalty_weight: f64, ridge: f64) -> Result<DVector<f64>> {
        let m = self.gram.nrows();
        let mut a = &self.gram + &self.penalty * penalty_weight;
        for k in 0..m {
            a[(k, k)] += ridge;
        }
        if let Some(ch) = a.clone().cholesky() {
            return Ok(ch.solve(&self.phit_x));
        }
        let bump = 1e-8 * a.trace().abs().max(f64::MIN_POSITIVE) / m as f64;
        for k in 0..m {
            a[(k, k)] += bump;
        }
        a.cholesky()
            .map(|ch| ch.solve(&self.phit_x))
            .ok_or_else(|| {
                Error::numerical(
                    "penalized smoothing",
                    format!("system not positive definite after ridge {bump:e}"),
                )
            })
    }

    fn residuals(&self, omega: &DVector<f64>) -> DVector<f64> {
        &self.x - &self.phi * omega
    }

    fn variance(&self, omega: &DVector<f64>) -> f64 {
        (self.residuals(omega).norm_squared() / self.n() as f64).max(SIGMA2_FLOOR)
    }

    /// Solves the coupled estimating equations at fixed ζ and scores the
    /// result with the smoothing GIC.
    pub(crate) fn fit(&self, zeta: f64) -> Result<SmoothFit> {
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::invalid(format!("zeta must be >= 0, got {zeta}")));
        }
        let n = self.n() as f64;
        let mut omega = self.solve(0.0, INIT_RIDGE)?;
        let mut sigma2 = self.variance(&omega);
        let mut iters = 0;
        let mut converged = false;
        let mut tol = FIXED_POINT_TOL;
        while iters < FIXED_POINT_MAX_ITERS {
            iters += 1;
            if iters == ROUNDOFF_CHECK_ITER {
                // very large ζ leaves the system so ill-conditioned that
                // successive solves jitter above FIXED_POINT_TOL
                let a = &self.gram + &self.penalty * (n * zeta * sigma2);
                tol = tol.max(16.0 * f64::EPSILON * condition_estimate(&a));
            }
            let next = self.solve(n * zeta * sigma2, 0.0)?;
            let next_sigma2 = self.variance(&next);
            let d_omega = (&next - &omega).norm() / next.norm().max(f64::MIN_POSITIVE);
            let d_sigma = (next_sigma2 - sigma2).abs() / sigma2;
            omega = next;
            sigma2 = next_sigma2;
            if d_omega <= tol && d_sigma <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                context: "smoothing fixed point".into(),
                iterations: iters,
                detail: format!("last iterate sigma2 = {sigma2:e}, omega = {omega:?}"),
            });
        }
        let mut fit = SmoothFit {
            coefficients: omega,
            noise_variance: sigma2,
            zeta,
            basis: Arc::clone(self.basis),
            gic: f64::NAN,
            fixed_point_iters: iters,
        };
        fit.gic = self.gic(&fit)?;
        Ok(fit)
    }

    pub(crate) fn influence_matrices(&self, fit: &SmoothFit) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.gram.nrows();
        let n = self.n() as f64;
        let s = fit.noise_variance;
        let zeta = fit.zeta;
        let lam = self.residuals(&fit.coefficients);

        // Φᵀ Λᵖ 1 for p = 1, 3 and Φᵀ Λ² Φ
        let mut phit_l1 = DVector::<f64>::zeros(m);
        let mut phit_l3 = DVector::<f64>::zeros(m);
        let mut weighted = self.phi.clone();
        for (i, &r) in lam.iter().enumerate() {
            let r2 = r * r;
            for k in 0..m {
                let p = self.phi[(i, k)];
                phit_l1[k] += p * r;
                phit_l3[k] += p * r2 * r;
                weighted[(i, k)] = p * r2;
            }
        }
        let phit_l2_phi = weighted.tr_mul(&self.phi);
        let sum_l4: f64 = lam.iter().map(|r| r * r * r * r).sum();
        let k_omega = &self.penalty * &fit.coefficients;

        let pre = 1.0 / (n * s);
        let mut q = DMatrix::zeros(m + 1, m + 1);
        let mut r = DMatrix::zeros(m + 1, m + 1);
        for i in 0..m {
            for j in 0..m {
                q[(i, j)] = pre * (phit_l2_phi[(i, j)] / s - zeta * k_omega[i] * phit_l1[j]);
                r[(i, j)] = pre * (self.gram[(i, j)] + n * zeta * s * self.penalty[(i, j)]);
            }
            let q_off = pre * (phit_l3[i] / (2.0 * s * s) - phit_l1[i] / (2.0 * s));
            q[(i, m)] = q_off;
            q[(m, i)] = q_off;
            let r_off = pre * phit_l1[i] / s;
            r[(i, m)] = r_off;
            r[(m, i)] = r_off;
        }
        q[(m, m)] = pre * (sum_l4 / (4.0 * s * s * s) - n / (4.0 * s));
        r[(m, m)] = pre * n / (2.0 * s);
        (q, r)
    }

    pub(crate) fn gic(&self, fit: &SmoothFit) -> Result<f64> {
        let n = self.n() as f64;
        let (q, r) = self.influence_matrices(fit);
        let trace = trace_q_rinv(&q, &r, "smoothing GIC")?;
        Ok(n * (2.0 * std::f64::consts::PI * fit.noise_variance).ln() + n + 2.0 * trace)
    }
}

pub fn fit_penalized(curve: &RawCurve, basis: &Arc<GaussianBasis>, zeta: f64) -> Result<SmoothFit> {
    CurveSystem::new(curve, basis)?.fit(zeta)
}

/// Smoothing GIC of a fit against the curve it was produced from.
pub fn gic_smoothing(fit: &SmoothFit, curve: &RawCurve) -> Result<f64> {
    CurveSystem::new(curve, &fit.basis)?.gic(fit)
}

/// The `(Q, R)` pair entering the smoothing GIC, both `(m+1) × (m+1)` with
/// the noise variance as the last parameter.
pub fn smoothing_influence_matrices(
    fit: &SmoothFit,
    curve: &RawCurve,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    Ok(CurveSystem::new(curve, &fit.basis)?.influence_matrices(fit))
}

fn sorted_zetas(zeta_grid: &[f64]) -> Result<Vec<f64>> {
    if zeta_grid.is_empty() {
        return Err(Error::invalid("empty zeta grid"));
    }
    let mut z = zeta_grid.to_vec();
    z.sort_by(f64::total_cmp);
    z.dedup();
    Ok(z)
}

fn sorted_ms(m_grid: &[usize]) -> Result<Vec<usize>> {
    if m_grid.is_empty() {
        return Err(Error::invalid("empty m grid"));
    }
    let mut m = m_grid.to_vec();
    m.sort_unstable();
    m.dedup();
    Ok(m)
}

/// Best ζ for one curve against one basis. Strict comparison keeps the
/// smaller ζ on ties.
fn best_zeta(curve: &RawCurve, basis: &Arc<GaussianBasis>, zetas: &[f64]) -> Result<SmoothFit> {
    let system = CurveSystem::new(curve, basis)?;
    let mut best: Option<SmoothFit> = None;
    let mut failures = Vec::new();
    for &z in zetas {
        match system.fit(z) {
            Ok(fit) if fit.gic.is_finite() => {
                if best.as_ref().is_none_or(|b| fit.gic < b.gic) {
                    best = Some(fit);
                }
            }
            Ok(fit) => failures.push(format!("m={} zeta={z:e}: GIC = {}", basis.m(), fit.gic)),
            Err(e) => failures.push(format!("m={} zeta={z:e}: {e}", basis.m())),
        }
    }
    best.ok_or(Error::AllFailed(failures))
}

/// Selects `(m, ζ)` for a single curve by minimizing the smoothing GIC over
/// the product grid. The basis spans the curve's own time range.
pub fn select_smoothing(curve: &RawCurve, m_grid: &[usize], zeta_grid: &[f64]) -> Result<SmoothFit> {
    let ms = sorted_ms(m_grid)?;
    let zetas = sorted_zetas(zeta_grid)?;
    let (lo, hi) = curve
        .time_range()
        .ok_or_else(|| Error::invalid("empty curve"))?;
    let mut best: Option<SmoothFit> = None;
    let mut failures = Vec::new();
    for m in ms {
        let basis = Arc::new(GaussianBasis::on_range(lo, hi, m)?);
        match best_zeta(curve, &basis, &zetas) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.gic < b.gic) {
                    best = Some(fit);
                }
            }
            Err(Error::AllFailed(f)) => failures.extend(f),
            Err(e) => failures.push(format!("m={m}: {e}")),
        }
    }
    best.ok_or(Error::AllFailed(failures))
}

/// Basis-expansion representation of a set of curves on one shared basis.
#[derive(Debug, Clone)]
pub struct FunctionalDataset {
    pub basis: Arc<GaussianBasis>,
    /// Row `α` holds the coefficient vector of curve `α`.
    pub coefficients: DMatrix<f64>,
    /// 1-based class labels; `None` marks an unlabeled curve.
    pub labels: Vec<Option<usize>>,
    pub noise_variances: Vec<f64>,
    pub zetas: Vec<f64>,
    pub curve_ids: Vec<String>,
    /// Per-curve GIC-optimal m. Diagnostic only; rows all use `basis`.
    pub per_curve_best_m: Vec<usize>,
    /// Sum over curves of the per-curve optimal GIC, for each candidate m
    /// that every curve could be fit at.
    pub m_scores: Vec<(usize, f64)>,
}

impl FunctionalDataset {
    pub fn len(&self) -> usize {
        self.curve_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve_ids.is_empty()
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    pub fn with_labels(mut self, labels: Vec<Option<usize>>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} curves",
                labels.len(),
                self.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Rows restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let m = self.m();
        Self {
            basis: Arc::clone(&self.basis),
            coefficients: DMatrix::from_fn(indices.len(), m, |r, c| self.coefficients[(indices[r], c)]),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            noise_variances: indices.iter().map(|&i| self.noise_variances[i]).collect(),
            zetas: indices.iter().map(|&i| self.zetas[i]).collect(),
            curve_ids: indices.iter().map(|&i| self.curve_ids[i].clone()).collect(),
            per_curve_best_m: indices.iter().map(|&i| self.per_curve_best_m[i]).collect(),
            m_scores: self.m_scores.clone(),
        }
    }
}

fn pooled_range(curves: &[RawCurve]) -> Result<(f64, f64)> {
    let mut range: Option<(f64, f64)> = None;
    for c in curves {
        if let Some((lo, hi)) = c.time_range() {
            range = Some(match range {
                None => (lo, hi),
                Some((a, b)) => (a.min(lo), b.max(hi)),
            });
        }
    }
    range.ok_or_else(|| Error::invalid("no observations in any curve"))
}

fn attach_id(id: &str, e: Error) -> Error {
    Error::Curve {
        id: id.to_string(),
        source: Box::new(e),
    }
}

/// Per-curve smoothing results at every candidate m, each with its
/// GIC-optimal ζ. Bases span the pooled time range of all tabulated curves,
/// so any subset can be functionalized without refitting.
#[derive(Debug)]
pub struct SmoothingTable {
    ms: Vec<usize>,
    bases: Vec<Arc<GaussianBasis>>,
    curve_ids: Vec<String>,
    /// `fits[α][j]`: best fit of curve α at m = ms[j].
    fits: Vec<Vec<Result<SmoothFit>>>,
}

impl SmoothingTable {
    pub fn build(curves: &[RawCurve], m_grid: &[usize], zeta_grid: &[f64]) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::invalid("no curves to functionalize"));
        }
        let ms = sorted_ms(m_grid)?;
        let zetas = sorted_zetas(zeta_grid)?;
        let (lo, hi) = pooled_range(curves)?;
        let bases: Vec<Arc<GaussianBasis>> = ms
            .iter()
            .map(|&m| GaussianBasis::on_range(lo, hi, m).map(Arc::new))
            .collect::<Result<_>>()?;
        let fits = curves
            .par_iter()
            .map(|c| bases.iter().map(|b| best_zeta(c, b, &zetas)).collect())
            .collect();
        Ok(Self {
            ms,
            bases,
            curve_ids: curves.iter().map(|c| c.id.clone()).collect(),
            fits,
        })
    }

    pub fn len(&self) -> usize {
        self.curve_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve_ids.is_empty()
    }

    pub fn m_grid(&self) -> &[usize] {
        &self.ms
    }

    /// Functionalizes the tabulated curves at `indices`. The common m
    /// minimizes the sum over those curves of their per-curve optimal GIC;
    /// ties keep the smaller m.
    pub fn dataset(&self, indices: &[usize], labels: &[Option<usize>]) -> Result<FunctionalDataset> {
        if indices.is_empty() {
            return Err(Error::invalid("no curves to functionalize"));
        }
        if labels.len() != indices.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} curves",
                labels.len(),
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("curve index {bad} out of range")));
        }
        let mut m_scores = Vec::new();
        let mut best_j: Option<(usize, f64)> = None;
        for (j, &m) in self.ms.iter().enumerate() {
            let mut total = 0.0;
            let mut feasible = true;
            for &a in indices {
                match &self.fits[a][j] {
                    Ok(f) => total += f.gic,
                    Err(_) => {
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            m_scores.push((m, total));
            if best_j.is_none_or(|(_, s)| total < s) {
                best_j = Some((j, total));
            }
        }

        let Some((j, _)) = best_j else {
            let mut failures = Vec::new();
            for &a in indices {
                for (m, f) in self.ms.iter().zip(&self.fits[a]) {
                    if let Err(e) = f {
                        failures.push(format!("curve {} m={m}: {e}", self.curve_ids[a]));
                    }
                }
            }
            return Err(Error::AllFailed(failures));
        };

        let basis = Arc::clone(&self.bases[j]);
        let m = basis.m();
        let n = indices.len();
        let mut coefficients = DMatrix::zeros(n, m);
        let mut noise_variances = Vec::with_capacity(n);
        let mut fit_zetas = Vec::with_capacity(n);
        let mut per_curve_best_m = Vec::with_capacity(n);
        for (row, &a) in indices.iter().enumerate() {
            let fits = &self.fits[a];
            let own_best = fits
                .iter()
                .zip(&self.ms)
                .filter_map(|(f, &mm)| f.as_ref().ok().map(|f| (mm, f.gic)))
                .fold(None, |acc: Option<(usize, f64)>, (mm, g)| match acc {
                    Some((_, bg)) if bg <= g => acc,
                    _ => Some((mm, g)),
                });
            per_curve_best_m.push(own_best.map(|(mm, _)| mm).unwrap_or(m));
            let fit = fits[j].as_ref().expect("feasible m has a fit for every curve");
            coefficients.row_mut(row).copy_from(&fit.coefficients.transpose());
            noise_variances.push(fit.noise_variance);
            fit_zetas.push(fit.zeta);
        }

        Ok(FunctionalDataset {
            basis,
            coefficients,
            labels: labels.to_vec(),
            noise_variances,
            zetas: fit_zetas,
            curve_ids: indices.iter().map(|&a| self.curve_ids[a].clone()).collect(),
            per_curve_best_m,
            m_scores,
        })
    }
}

/// Smooths every curve on a common basis.
///
/// Each curve gets its own GIC-optimal ζ at every candidate m; the common m
/// minimizes the sum over curves of those per-curve optima. The basis spans
/// the pooled time range of all curves.
pub fn functionalize(
    curves: &[RawCurve],
    labels: &[Option<usize>],
    m_grid: &[usize],
    zeta_grid: &[f64],
) -> Result<FunctionalDataset> {
    if labels.len() != curves.len() {
        return Err(Error::invalid(format!(
            "{} labels for {} curves",
            labels.len(),
            curves.len()
        )));
    }
    let table = SmoothingTable::build(curves, m_grid, zeta_grid)?;
    let all: Vec<usize> = (0..curves.len()).collect();
    table.dataset(&all, labels)
}

pub fn functionalize_with_grid(
    curves: &[RawCurve],
    labels: &[Option<usize>],
    grid: &SmoothingGrid,
) -> Result<FunctionalDataset> {
    functionalize(curves, labels, &grid.m_grid, &grid.zeta_grid)
}

/// Smooths curves against a fixed basis, re-selecting ζ per curve. Used for
/// new curves that must live in a previously fitted coefficient space.
pub fn smooth_with_basis(
    curves: &[RawCurve],
    basis: &Arc<GaussianBasis>,
    zeta_grid: &[f64],
) -> Result<FunctionalDataset> {
    let zetas = sorted_zetas(zeta_grid)?;
    let fits: Vec<SmoothFit> = curves
        .par_iter()
        .map(|c| best_zeta(c, basis, &zetas).map_err(|e| attach_id(&c.id, e)))
        .collect::<Result<_>>()?;
    let m = basis.m();
    let mut coefficients = DMatrix::zeros(curves.len(), m);
    for (a, f) in fits.iter().enumerate() {
        coefficients.row_mut(a).copy_from(&f.coefficients.transpose());
    }
    Ok(FunctionalDataset {
        basis: Arc::clone(basis),
        coefficients,
        labels: vec![None; curves.len()],
        noise_variances: fits.iter().map(|f| f.noise_variance).collect(),
        zetas: fits.iter().map(|f| f.zeta).collect(),
        curve_ids: curves.iter().map(|c| c.id.clone()).collect(),
        per_curve_best_m: vec![m; curves.len()],
        m_scores: Vec::new(),
    })
}
