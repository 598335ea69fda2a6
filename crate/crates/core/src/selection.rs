//! Choosing the classifier's regularization parameter by GIC or GBIC.
//!
//! Both criteria are evaluated on the labeled rows only, even when the
//! coefficients were fit with unlabeled curves as well. Stacked parameter
//! vectors are ordered `(β_1ᵀ, …, β_{L−1}ᵀ)ᵀ`, matching the tiling of `A`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, log_det_spd, trace_q_rinv};
use crate::logit::{
    em_fit, labeled_loglik, posteriors, BlockPenalty, ClassifierDesign, SemiLogisticFit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionKind {
    Gic,
    Gbic,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::Gic => "gic",
            CriterionKind::Gbic => "gbic",
        }
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gic" => Ok(CriterionKind::Gic),
            "gbic" => Ok(CriterionKind::Gbic),
            other => Err(Error::invalid(format!("unknown criterion '{other}'"))),
        }
    }
}

/// The building blocks of `Q(β̂)` and `R(β̂)`, over labeled rows.
#[derive(Debug, Clone)]
pub struct CriterionInputs {
    /// `(Z, …, Z)`, `n₁ × (m+1)(L−1)`.
    pub a: DMatrix<f64>,
    /// Block `k` is `y_(k) 1ᵀ_{m+1}`.
    pub b: DMatrix<f64>,
    /// Block `k` is `π_(k) 1ᵀ_{m+1}`.
    pub c: DMatrix<f64>,
    /// `blockdiag(Zᵀ diag(π_(k)) Z)`.
    pub d: DMatrix<f64>,
    /// `blockdiag(K, …, K)`.
    pub e: DMatrix<f64>,
    /// Labeled design rows, `n₁ × (m+1)`.
    pub z: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct CriterionMatrices {
    pub inputs: CriterionInputs,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub value: f64,
    pub lambda: f64,
    /// `Σ_{α ≤ n₁} log f(y_α | x_α; β̂)`.
    pub loglik: f64,
    /// `tr(Q R⁻¹)` for GIC; the `log |R|` term for GBIC.
    pub complexity: f64,
    pub condition_estimate: f64,
}

fn check(fit: &SemiLogisticFit, design: &ClassifierDesign, penalty: &BlockPenalty) -> Result<usize> {
    let p = design.n_features();
    if fit.beta.n_classes() != design.n_classes() || fit.beta.n_features() != p {
        return Err(Error::invalid(format!(
            "fit has {} classes and {} features, design has {} and {}",
            fit.beta.n_classes(),
            fit.beta.n_features(),
            design.n_classes(),
            p
        )));
    }
    if penalty.matrix().nrows() != p {
        return Err(Error::invalid(format!(
            "penalty is {0}x{0}, design has {p} features",
            penalty.matrix().nrows()
        )));
    }
    Ok(p)
}

/// Assembles `A, B, C, D, E` and the matrices
/// `Q = (1/n₁)[{(B−C)⊙A}ᵀ − λEβ̂1ᵀ]{(B−C)⊙A}` and
/// `R = −(1/n₁)(C⊙A)ᵀ(C⊙A) + (1/n₁)D + λE`.
pub fn criterion_matrices(
    fit: &SemiLogisticFit,
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
) -> Result<CriterionMatrices> {
    let p = check(fit, design, penalty)?;
    let labeled = design.labeled_only();
    let blocks = design.n_classes() - 1;
    let n1 = labeled.n();
    let big = p * blocks;
    let z = labeled.z().clone();
    let pi = posteriors(&labeled, &fit.beta);
    let y = labeled.y();

    let a = DMatrix::from_fn(n1, big, |r, c| z[(r, c % p)]);
    let b = DMatrix::from_fn(n1, big, |r, c| y[(r, c / p)]);
    let c = DMatrix::from_fn(n1, big, |r, col| pi[(r, col / p)]);
    let mut d = DMatrix::zeros(big, big);
    let mut e = DMatrix::zeros(big, big);
    for k in 0..blocks {
        let mut weighted = z.clone();
        for r in 0..n1 {
            weighted.row_mut(r).scale_mut(pi[(r, k)]);
        }
        d.view_mut((k * p, k * p), (p, p)).copy_from(&weighted.tr_mul(&z));
        e.view_mut((k * p, k * p), (p, p)).copy_from(penalty.matrix());
    }

    let n1f = n1 as f64;
    let lambda = fit.lambda;
    let h = (&b - &c).component_mul(&a);
    let beta = fit.beta.stacked();
    let ones_h = DVector::from_fn(big, |j, _| h.column(j).sum());
    let q = (h.tr_mul(&h) - (&e * &beta) * ones_h.transpose() * lambda) / n1f;
    let ca = c.component_mul(&a);
    let r = -ca.tr_mul(&ca) / n1f + &d / n1f + &e * lambda;

    Ok(CriterionMatrices {
        inputs: CriterionInputs { a, b, c, d, e, z },
        q,
        r,
    })
}

/// `GIC = −2 Σ log f(y_α | x_α; β̂) + 2 tr{Q(β̂) R(β̂)⁻¹}`.
pub fn gic_classifier(
    fit: &SemiLogisticFit,
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
) -> Result<CriterionReport> {
    let mats = criterion_matrices(fit, design, penalty)?;
    gic_from(fit, design, &mats)
}

fn gic_from(fit: &SemiLogisticFit, design: &ClassifierDesign, mats: &CriterionMatrices) -> Result<CriterionReport> {
    let loglik = labeled_loglik(design, &fit.beta);
    let trace = trace_q_rinv(&mats.q, &mats.r, "classification GIC")?;
    let value = -2.0 * loglik + 2.0 * trace;
    finish(CriterionKind::Gic, value, fit.lambda, loglik, trace, &mats.r)
}

/// `GBIC = −2 Σ log f + n₁λ Σ β̂_kᵀKβ̂_k − (L−1) log|K|₊ + log|R|
///        − (L−1)(m+1−d) log λ − (L−1) d log(2π/n₁)`.
pub fn gbic_classifier(
    fit: &SemiLogisticFit,
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
) -> Result<CriterionReport> {
    let mats = criterion_matrices(fit, design, penalty)?;
    gbic_from(fit, design, penalty, &mats)
}

fn gbic_from(
    fit: &SemiLogisticFit,
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
    mats: &CriterionMatrices,
) -> Result<CriterionReport> {
    let lambda = fit.lambda;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("GBIC needs lambda > 0, got {lambda}")));
    }
    let loglik = labeled_loglik(design, &fit.beta);
    let log_det_r = log_det_spd(&mats.r).ok_or_else(|| {
        Error::numerical(
            "classification GBIC",
            format!(
                "R not positive definite (condition estimate {:e})",
                condition_estimate(&mats.r)
            ),
        )
    })?;
    let n1 = design.n_labeled() as f64;
    let blocks = (design.n_classes() - 1) as f64;
    let p = design.n_features() as f64;
    let d = penalty.rank() as f64;
    let value = -2.0 * loglik + n1 * lambda * penalty.quadratic_sum(&fit.beta)
        - blocks * penalty.log_pseudo_determinant()
        + log_det_r
        - blocks * (p - d) * lambda.ln()
        - blocks * d * (2.0 * std::f64::consts::PI / n1).ln();
    finish(CriterionKind::Gbic, value, lambda, loglik, log_det_r, &mats.r)
}

fn finish(
    kind: CriterionKind,
    value: f64,
    lambda: f64,
    loglik: f64,
    complexity: f64,
    r: &DMatrix<f64>,
) -> Result<CriterionReport> {
    if !value.is_finite() {
        return Err(Error::numerical(
            format!("classification {kind}"),
            format!("criterion value is {value}"),
        ));
    }
    Ok(CriterionReport {
        kind,
        value,
        lambda,
        loglik,
        complexity,
        condition_estimate: condition_estimate(r),
    })
}

pub fn score(
    kind: CriterionKind,
    fit: &SemiLogisticFit,
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
) -> Result<CriterionReport> {
    match kind {
        CriterionKind::Gic => gic_classifier(fit, design, penalty),
        CriterionKind::Gbic => gbic_classifier(fit, design, penalty),
    }
}

/// One grid point: the fit (or why it failed) and its scores.
#[derive(Debug)]
pub struct GridPoint {
    pub lambda: f64,
    pub fit: Result<SemiLogisticFit>,
    pub gic: Option<Result<CriterionReport>>,
    pub gbic: Option<Result<CriterionReport>>,
}

impl GridPoint {
    pub fn report(&self, kind: CriterionKind) -> Option<&Result<CriterionReport>> {
        match kind {
            CriterionKind::Gic => self.gic.as_ref(),
            CriterionKind::Gbic => self.gbic.as_ref(),
        }
    }
}

/// Every grid point fitted once and scored under each requested criterion.
#[derive(Debug)]
pub struct LambdaScan {
    pub points: Vec<GridPoint>,
}

/// Fits the model at every `λ` in the grid and scores each fit with the
/// given criteria. Grid points are evaluated in parallel; results keep
/// grid order.
pub fn scan_lambda(
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
    lambda_grid: &[f64],
    kinds: &[CriterionKind],
    max_em: usize,
) -> Result<LambdaScan> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if let Some(bad) = lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("lambda grid values must be positive, got {bad}")));
    }
    let points = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let fit = em_fit(design, lambda, penalty, max_em);
            let (mut gic, mut gbic) = (None, None);
            if let Ok(f) = &fit {
                let mats = criterion_matrices(f, design, penalty);
                for kind in kinds {
                    let rep = match &mats {
                        Ok(m) => match kind {
                            CriterionKind::Gic => gic_from(f, design, m),
                            CriterionKind::Gbic => gbic_from(f, design, penalty, m),
                        },
                        Err(e) => Err(Error::numerical("criterion matrices", e.to_string())),
                    };
                    match kind {
                        CriterionKind::Gic => gic = Some(rep),
                        CriterionKind::Gbic => gbic = Some(rep),
                    }
                }
            }
            GridPoint { lambda, fit, gic, gbic }
        })
        .collect();
    Ok(LambdaScan { points })
}

impl LambdaScan {
    /// Index of the grid point minimizing `kind`; ties go to the larger λ.
    pub fn best_index(&self, kind: CriterionKind) -> Result<usize> {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&i, &j| self.points[i].lambda.total_cmp(&self.points[j].lambda));
        let mut best: Option<(usize, f64)> = None;
        let mut failures = Vec::new();
        for i in order {
            let pt = &self.points[i];
            match (&pt.fit, pt.report(kind)) {
                (Ok(_), Some(Ok(rep))) => {
                    if best.is_none_or(|(_, v)| rep.value <= v) {
                        best = Some((i, rep.value));
                    }
                }
                (Err(e), _) | (Ok(_), Some(Err(e))) => {
                    failures.push(format!("lambda {:e}: {e}", pt.lambda))
                }
                (Ok(_), None) => failures.push(format!("lambda {:e}: {kind} not computed", pt.lambda)),
            }
        }
        best.map(|(i, _)| i).ok_or(Error::AllFailed(failures))
    }

    pub fn best(&self, kind: CriterionKind) -> Result<(SemiLogisticFit, CriterionReport)> {
        let i = self.best_index(kind)?;
        let pt = &self.points[i];
        match (&pt.fit, pt.report(kind)) {
            (Ok(f), Some(Ok(r))) => Ok((f.clone(), r.clone())),
            _ => unreachable!("best_index only returns scored points"),
        }
    }

    pub fn failures(&self, kind: CriterionKind) -> usize {
        self.points
            .iter()
            .filter(|p| !matches!((&p.fit, p.report(kind)), (Ok(_), Some(Ok(_)))))
            .count()
    }
}

/// Fits every λ in the grid and returns the fit minimizing `kind`.
pub fn select_lambda(
    design: &ClassifierDesign,
    penalty: &BlockPenalty,
    lambda_grid: &[f64],
    kind: CriterionKind,
    max_em: usize,
) -> Result<(SemiLogisticFit, CriterionReport)> {
    scan_lambda(design, penalty, lambda_grid, &[kind], max_em)?.best(kind)
}
