//! Semi-supervised functional logistic model.
//!
//! Each curve enters through `z_α = (1, w_αᵀJ)ᵀ`, where `w_α` are its basis
//! coefficients and `J` the basis cross-product matrix. Class `L` is the
//! reference: `log π_k/π_L = β_kᵀz_α` for `k < L`. Labeled rows carry one-hot
//! responses `y_α`; unlabeled rows carry posterior weights `t̂_α` that the EM
//! loop refreshes after every M-step.
//!
//! Parameters are stacked as `(β_1ᵀ, …, β_{L−1}ᵀ)ᵀ` wherever a single
//! vector is needed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::CrossProductMatrix;
use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::smoother::FunctionalDataset;

const MSTEP_GRAD_TOL: f64 = 1e-8;
const MSTEP_FALLBACK_TOL: f64 = 1e-6;
const MSTEP_MAX_ITERS: usize = 100;
const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;
pub const EM_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_EM: usize = 500;

/// Design rows for the classifier, labeled rows first.
#[derive(Debug, Clone)]
pub struct ClassifierDesign {
    z: DMatrix<f64>,
    n_labeled: usize,
    y: DMatrix<f64>,
    classes: Vec<usize>,
    n_classes: usize,
    row_order: Vec<usize>,
}

/// `Z = [1 | W J]`, one row per coefficient vector.
pub fn design_rows(coefficients: &DMatrix<f64>, j: &CrossProductMatrix) -> Result<DMatrix<f64>> {
    let m = j.matrix().nrows();
    if coefficients.ncols() != m {
        return Err(Error::invalid(format!(
            "coefficients have {} columns but J is {m} x {m}",
            coefficients.ncols()
        )));
    }
    let wj = coefficients * j.matrix();
    let n = coefficients.nrows();
    Ok(DMatrix::from_fn(n, m + 1, |r, c| if c == 0 { 1.0 } else { wj[(r, c - 1)] }))
}

impl ClassifierDesign {
    /// Builds a design from raw rows. Labels are 1-based class indices;
    /// labeled rows are moved to the front, keeping their relative order.
    pub fn from_rows(z: DMatrix<f64>, labels: &[Option<usize>], n_classes: usize) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {n_classes}")));
        }
        if labels.len() != z.nrows() {
            return Err(Error::invalid(format!(
                "{} labels for {} design rows",
                labels.len(),
                z.nrows()
            )));
        }
        let mut labeled = Vec::new();
        let mut unlabeled = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            match *l {
                Some(c) if (1..=n_classes).contains(&c) => labeled.push(i),
                Some(c) => {
                    return Err(Error::invalid(format!(
                        "label {c} on row {i} outside 1..={n_classes}"
                    )))
                }
                None => unlabeled.push(i),
            }
        }
        if labeled.is_empty() {
            return Err(Error::invalid("design has no labeled rows"));
        }
        let n_labeled = labeled.len();
        let row_order: Vec<usize> = labeled.iter().chain(&unlabeled).copied().collect();
        let p = z.ncols();
        let z = DMatrix::from_fn(row_order.len(), p, |r, c| z[(row_order[r], c)]);
        let classes: Vec<usize> = labeled.iter().map(|&i| labels[i].unwrap()).collect();
        let y = DMatrix::from_fn(n_labeled, n_classes - 1, |r, k| {
            if classes[r] == k + 1 {
                1.0
            } else {
                0.0
            }
        });
        Ok(Self {
            z,
            n_labeled,
            y,
            classes,
            n_classes,
            row_order,
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n() - self.n_labeled
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Columns of `Z`, i.e. `m + 1`.
    pub fn n_features(&self) -> usize {
        self.z.ncols()
    }

    /// 1-based classes of the labeled rows, in design order.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    /// `row_order()[r]` is the dataset row that design row `r` came from.
    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }

    /// The same design with the unlabeled rows dropped.
    pub fn labeled_only(&self) -> Self {
        Self {
            z: self.z.rows(0, self.n_labeled).into_owned(),
            n_labeled: self.n_labeled,
            y: self.y.clone(),
            classes: self.classes.clone(),
            n_classes: self.n_classes,
            row_order: self.row_order[..self.n_labeled].to_vec(),
        }
    }

    fn check_pseudo(&self, pseudo: &DMatrix<f64>) -> Result<()> {
        if pseudo.nrows() != self.n_unlabeled() || pseudo.ncols() != self.n_classes - 1 {
            return Err(Error::invalid(format!(
                "pseudo-labels are {}x{}, expected {}x{}",
                pseudo.nrows(),
                pseudo.ncols(),
                self.n_unlabeled(),
                self.n_classes - 1
            )));
        }
        Ok(())
    }

    /// Responses for all rows: `y` on labeled rows, `pseudo` below.
    fn responses(&self, pseudo: &DMatrix<f64>) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.n(), self.n_classes - 1);
        r.rows_mut(0, self.n_labeled).copy_from(&self.y);
        if self.n_unlabeled() > 0 {
            r.rows_mut(self.n_labeled, self.n_unlabeled()).copy_from(pseudo);
        }
        r
    }
}

/// Builds the classifier design from a functional dataset, with `L` taken as
/// the largest label present.
pub fn build_design(data: &FunctionalDataset, j: &CrossProductMatrix) -> Result<ClassifierDesign> {
    let n_classes = data.labels.iter().flatten().copied().max().unwrap_or(0);
    build_design_with_classes(data, j, n_classes)
}

pub fn build_design_with_classes(
    data: &FunctionalDataset,
    j: &CrossProductMatrix,
    n_classes: usize,
) -> Result<ClassifierDesign> {
    if j.matrix().nrows() != data.m() {
        return Err(Error::invalid(format!(
            "J is {}x{} but the dataset basis has m = {}",
            j.matrix().nrows(),
            j.matrix().ncols(),
            data.m()
        )));
    }
    let z = design_rows(&data.coefficients, j)?;
    ClassifierDesign::from_rows(z, &data.labels, n_classes)
}

/// `(L−1) × (m+1)` coefficients; row `k` is `β_kᵀ`, column 0 the intercepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBlock {
    pub beta: DMatrix<f64>,
}

impl CoefficientBlock {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            beta: DMatrix::zeros(n_classes - 1, n_features),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.beta.nrows() + 1
    }

    pub fn n_features(&self) -> usize {
        self.beta.ncols()
    }

    /// `(β_1ᵀ, …, β_{L−1}ᵀ)ᵀ`.
    pub fn stacked(&self) -> DVector<f64> {
        let (r, c) = self.beta.shape();
        DVector::from_fn(r * c, |i, _| self.beta[(i / c, i % c)])
    }

    pub fn from_stacked(v: &DVector<f64>, n_classes: usize, n_features: usize) -> Self {
        Self {
            beta: DMatrix::from_fn(n_classes - 1, n_features, |k, j| v[k * n_features + j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KStarKind {
    Identity,
    Custom,
}

/// `K = diag(0, K*)`: intercepts are never penalized.
#[derive(Debug, Clone)]
pub struct BlockPenalty {
    k: DMatrix<f64>,
    kind: KStarKind,
    rank_d: usize,
    log_pdet: f64,
}

/// Eigenvalues above this count toward the rank and pseudo-determinant.
pub const EIGEN_POSITIVE_TOL: f64 = 1e-10;

impl BlockPenalty {
    pub fn identity(m: usize) -> Self {
        let mut k = DMatrix::identity(m + 1, m + 1);
        k[(0, 0)] = 0.0;
        Self {
            k,
            kind: KStarKind::Identity,
            rank_d: m,
            log_pdet: 0.0,
        }
    }

    pub fn from_kstar(kstar: &DMatrix<f64>) -> Result<Self> {
        let m = kstar.nrows();
        if !kstar.is_square() {
            return Err(Error::invalid("K* must be square"));
        }
        let asym = (kstar - kstar.transpose()).amax();
        if asym > 1e-12 * kstar.amax().max(1.0) {
            return Err(Error::invalid("K* must be symmetric"));
        }
        let eig = kstar.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&e| e < -EIGEN_POSITIVE_TOL) {
            return Err(Error::invalid("K* must be positive semi-definite"));
        }
        let positive: Vec<f64> = eig
            .eigenvalues
            .iter()
            .copied()
            .filter(|&e| e > EIGEN_POSITIVE_TOL)
            .collect();
        let mut k = DMatrix::zeros(m + 1, m + 1);
        k.view_mut((1, 1), (m, m)).copy_from(kstar);
        Ok(Self {
            k,
            kind: KStarKind::Custom,
            rank_d: positive.len(),
            log_pdet: positive.iter().map(|e| e.ln()).sum(),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn kind(&self) -> KStarKind {
        self.kind
    }

    /// Rank `d` of `K`.
    pub fn rank(&self) -> usize {
        self.rank_d
    }

    /// `log |K|₊`, the log of the product of the positive eigenvalues.
    pub fn log_pseudo_determinant(&self) -> f64 {
        self.log_pdet
    }

    /// `Σ_k β_kᵀ K β_k`.
    pub fn quadratic_sum(&self, beta: &CoefficientBlock) -> f64 {
        let kb = &beta.beta * &self.k;
        kb.component_mul(&beta.beta).sum()
    }
}

/// Linear predictors `η = Z Bᵀ`, `n × (L−1)`.
fn linear_predictors(z: &DMatrix<f64>, beta: &CoefficientBlock) -> DMatrix<f64> {
    z * beta.beta.transpose()
}

/// Stable `log(1 + Σ exp η_k)` and the matching probabilities, class L last.
fn softmax_row(eta: impl Iterator<Item = f64> + Clone, probs: &mut [f64]) -> f64 {
    let max = eta.clone().fold(0.0f64, f64::max);
    let reference = (-max).exp();
    let mut total = reference;
    for (p, e) in probs.iter_mut().zip(eta) {
        *p = (e - max).exp();
        total += *p;
    }
    let last = probs.len() - 1;
    probs[last] = reference;
    for p in probs.iter_mut() {
        *p /= total;
    }
    max + total.ln()
}

/// Posterior class probabilities for arbitrary design rows, `n × L`.
pub fn posteriors_for(z: &DMatrix<f64>, beta: &CoefficientBlock) -> DMatrix<f64> {
    let eta = linear_predictors(z, beta);
    let l = beta.n_classes();
    let mut out = DMatrix::zeros(z.nrows(), l);
    let mut row = vec![0.0; l];
    for a in 0..z.nrows() {
        softmax_row(eta.row(a).iter().copied(), &mut row);
        for k in 0..l {
            out[(a, k)] = row[k];
        }
    }
    out
}

pub fn posteriors(design: &ClassifierDesign, beta: &CoefficientBlock) -> DMatrix<f64> {
    posteriors_for(&design.z, beta)
}

/// `π_1..π_{L−1}` on the unlabeled rows: the E-step.
pub fn pseudo_labels(design: &ClassifierDesign, beta: &CoefficientBlock) -> DMatrix<f64> {
    let z = design.z.rows(design.n_labeled, design.n_unlabeled()).into_owned();
    let p = posteriors_for(&z, beta);
    p.columns(0, design.n_classes - 1).into_owned()
}

fn check_shapes(design: &ClassifierDesign, beta: &CoefficientBlock, pseudo: &DMatrix<f64>) -> Result<()> {
    if beta.n_classes() != design.n_classes || beta.n_features() != design.n_features() {
        return Err(Error::invalid(format!(
            "beta is {}x{}, design needs {}x{}",
            beta.beta.nrows(),
            beta.beta.ncols(),
            design.n_classes - 1,
            design.n_features()
        )));
    }
    design.check_pseudo(pseudo)
}

/// Unpenalized log-likelihood over all rows with the given responses.
fn loglik(z: &DMatrix<f64>, responses: &DMatrix<f64>, beta: &CoefficientBlock) -> f64 {
    let eta = linear_predictors(z, beta);
    let mut scratch = vec![0.0; beta.n_classes()];
    let mut total = 0.0;
    for a in 0..z.nrows() {
        let lse = softmax_row(eta.row(a).iter().copied(), &mut scratch);
        let fit: f64 = eta.row(a).iter().zip(responses.row(a).iter()).map(|(e, r)| e * r).sum();
        total += fit - lse;
    }
    total
}

/// `Σ_{α ≤ n₁} log f(y_α | x_α; β)` over the labeled rows only.
pub fn labeled_loglik(design: &ClassifierDesign, beta: &CoefficientBlock) -> f64 {
    let z = design.z.rows(0, design.n_labeled).into_owned();
    loglik(&z, &design.y, beta)
}

/// `ℓ(β) − (n₁λ/2) Σ_k β_kᵀKβ_k` with `t̂` standing in for the unknown
/// labels of unlabeled rows. The penalty scales with the labeled count.
pub fn penalized_loglik(
    design: &ClassifierDesign,
    beta: &CoefficientBlock,
    pseudo: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> Result<f64> {
    check_shapes(design, beta, pseudo)?;
    Ok(objective(design, beta, &design.responses(pseudo), lambda, penalty))
}

fn objective(
    design: &ClassifierDesign,
    beta: &CoefficientBlock,
    responses: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> f64 {
    let n1 = design.n_labeled as f64;
    loglik(&design.z, responses, beta) - 0.5 * n1 * lambda * penalty.quadratic_sum(beta)
}

/// Gradient and expected information of the penalized log-likelihood over
/// the stacked parameter vector.
pub fn score_and_information(
    design: &ClassifierDesign,
    beta: &CoefficientBlock,
    pseudo: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_shapes(design, beta, pseudo)?;
    Ok(score_info(design, beta, &design.responses(pseudo), lambda, penalty))
}

fn score_info(
    design: &ClassifierDesign,
    beta: &CoefficientBlock,
    responses: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> (DVector<f64>, DMatrix<f64>) {
    let z = &design.z;
    let p = z.ncols();
    let blocks = design.n_classes - 1;
    let n1 = design.n_labeled as f64;
    let probs = posteriors_for(z, beta);
    let resid = responses - probs.columns(0, blocks);
    let grad_blocks = z.tr_mul(&resid); // p × (L−1)
    let kb = &penalty.k * beta.beta.transpose(); // p × (L−1)

    let mut grad = DVector::zeros(p * blocks);
    for k in 0..blocks {
        for j in 0..p {
            grad[k * p + j] = grad_blocks[(j, k)] - n1 * lambda * kb[(j, k)];
        }
    }

    let mut info = DMatrix::zeros(p * blocks, p * blocks);
    let mut weighted = z.clone();
    for k in 0..blocks {
        for l in k..blocks {
            for a in 0..z.nrows() {
                let w = if k == l {
                    probs[(a, k)] * (1.0 - probs[(a, k)])
                } else {
                    -probs[(a, k)] * probs[(a, l)]
                };
                for j in 0..p {
                    weighted[(a, j)] = z[(a, j)] * w;
                }
            }
            let mut block = weighted.tr_mul(z);
            if k == l {
                block += &penalty.k * (n1 * lambda);
            }
            info.view_mut((k * p, l * p), (p, p)).copy_from(&block);
            if k != l {
                info.view_mut((l * p, k * p), (p, p)).copy_from(&block.transpose());
            }
        }
    }
    (grad, info)
}

/// Outcome of one penalized Fisher-scoring run.
#[derive(Debug, Clone)]
pub struct MStep {
    pub beta: CoefficientBlock,
    pub iterations: usize,
    pub objective: f64,
    /// Objective at the start and after every accepted step.
    pub objective_path: Vec<f64>,
    pub converged: bool,
}

fn stationary(grad: &DVector<f64>, obj: f64, tol: f64) -> bool {
    grad.amax() <= tol * (1.0 + obj.abs())
}

/// Maximizes the penalized log-likelihood by Fisher scoring with step
/// halving, starting from `beta0`. The objective never decreases.
pub fn fisher_scoring_mstep(
    design: &ClassifierDesign,
    beta0: &CoefficientBlock,
    pseudo: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> Result<MStep> {
    check_shapes(design, beta0, pseudo)?;
    let responses = design.responses(pseudo);
    run_scoring(design, beta0, &responses, lambda, penalty)
}

fn run_scoring(
    design: &ClassifierDesign,
    beta0: &CoefficientBlock,
    responses: &DMatrix<f64>,
    lambda: f64,
    penalty: &BlockPenalty,
) -> Result<MStep> {
    let (l, p) = (design.n_classes, design.n_features());
    let mut beta = beta0.clone();
    let mut obj = objective(design, &beta, responses, lambda, penalty);
    if !obj.is_finite() {
        return Err(Error::numerical("Fisher scoring", "non-finite starting objective"));
    }
    let mut path = vec![obj];
    let mut iterations = 0;
    loop {
        let (grad, info) = score_info(design, &beta, responses, lambda, penalty);
        if stationary(&grad, obj, MSTEP_GRAD_TOL) {
            return Ok(MStep { beta, iterations, objective: obj, objective_path: path, converged: true });
        }
        if iterations == MSTEP_MAX_ITERS {
            return Ok(MStep { beta, iterations, objective: obj, objective_path: path, converged: false });
        }
        let Some((direction, _)) = spd_solve(&info, &grad) else {
            return Err(Error::numerical(
                "Fisher scoring",
                format!("information matrix not positive definite (lambda = {lambda:e})"),
            ));
        };
        let current = beta.stacked();
        let mut step = 1.0;
        let accepted = loop {
            let trial = CoefficientBlock::from_stacked(&(&current + &direction * step), l, p);
            let trial_obj = objective(design, &trial, responses, lambda, penalty);
            if trial_obj >= obj {
                break Some((trial, trial_obj));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, trial_obj)) => {
                beta = trial;
                obj = trial_obj;
                path.push(obj);
            }
            None if stationary(&grad, obj, MSTEP_FALLBACK_TOL) => {
                return Ok(MStep { beta, iterations, objective: obj, objective_path: path, converged: true });
            }
            None => {
                return Err(Error::NonConvergence {
                    context: "Fisher scoring".into(),
                    iterations,
                    detail: format!(
                        "no ascent along the scoring direction; objective {obj:e}, gradient max-norm {:e}",
                        grad.amax()
                    ),
                });
            }
        }
    }
}

/// A fitted semi-supervised functional logistic model.
#[derive(Debug, Clone)]
pub struct SemiLogisticFit {
    pub beta: CoefficientBlock,
    pub lambda: f64,
    pub em_iterations: usize,
    /// `ℓ_λ` at the initial estimate and after every EM iteration.
    pub objective_trace: Vec<f64>,
    /// Posterior weights `t̂` of the unlabeled rows at the final estimate.
    pub pseudo_labels: DMatrix<f64>,
    pub converged: bool,
    /// EM iterations at which the plug-in objective went down.
    pub objective_decreases: Vec<usize>,
}

/// EM around penalized Fisher scoring.
///
/// Starts from the labeled-only penalized fit, then alternates the E-step
/// (`t̂_α = π_{1..L−1}(x_α; β̂)` on unlabeled rows) and a Fisher-scoring
/// M-step on all rows until successive objectives differ by less than
/// `1e-5` or `max_em` iterations have run. The trace entry for an estimate
/// uses the pseudo-labels computed from that same estimate.
pub fn em_fit(
    design: &ClassifierDesign,
    lambda: f64,
    penalty: &BlockPenalty,
    max_em: usize,
) -> Result<SemiLogisticFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if penalty.k.nrows() != design.n_features() {
        return Err(Error::invalid(format!(
            "penalty is {}x{}, design has {} features",
            penalty.k.nrows(),
            penalty.k.ncols(),
            design.n_features()
        )));
    }
    let mut counts = vec![0usize; design.n_classes];
    for &c in &design.classes {
        counts[c - 1] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class {} has no labeled curves",
            missing + 1
        )));
    }

    let labeled = design.labeled_only();
    let start = CoefficientBlock::zeros(design.n_classes, design.n_features());
    let step1 = run_scoring(&labeled, &start, &labeled.y, lambda, penalty).map_err(|e| Error::EmStep {
        iteration: 0,
        source: Box::new(e),
    })?;

    if design.n_unlabeled() == 0 {
        return Ok(SemiLogisticFit {
            beta: step1.beta,
            lambda,
            em_iterations: 0,
            objective_trace: vec![step1.objective],
            pseudo_labels: DMatrix::zeros(0, design.n_classes - 1),
            converged: step1.converged,
            objective_decreases: Vec::new(),
        });
    }

    let mut beta = step1.beta;
    let mut pseudo = pseudo_labels(design, &beta);
    let mut obj = objective(design, &beta, &design.responses(&pseudo), lambda, penalty);
    let mut trace = vec![obj];
    let mut decreases = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_em {
        iterations += 1;
        let responses = design.responses(&pseudo);
        let m = run_scoring(design, &beta, &responses, lambda, penalty).map_err(|e| Error::EmStep {
            iteration: iterations,
            source: Box::new(e),
        })?;
        beta = m.beta;
        pseudo = pseudo_labels(design, &beta);
        let next = objective(design, &beta, &design.responses(&pseudo), lambda, penalty);
        trace.push(next);
        if next < obj {
            decreases.push(iterations);
        }
        let delta = (next - obj).abs();
        obj = next;
        if delta < EM_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("EM stopped at the cap of {max_em} iterations (lambda = {lambda:e})");
    }
    Ok(SemiLogisticFit {
        beta,
        lambda,
        em_iterations: iterations,
        objective_trace: trace,
        pseudo_labels: pseudo,
        converged,
        objective_decreases: decreases,
    })
}

/// Most probable class (1-based) for each row of `z`, with posteriors.
/// Ties go to the lowest class index.
pub fn predict(beta: &CoefficientBlock, z: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if z.ncols() != beta.n_features() {
        return Err(Error::invalid(format!(
            "design rows have {} columns, model expects {}",
            z.ncols(),
            beta.n_features()
        )));
    }
    let probs = posteriors_for(z, beta);
    let classes = (0..probs.nrows())
        .map(|a| {
            let mut best = 0;
            for k in 1..probs.ncols() {
                if probs[(a, k)] > probs[(a, best)] {
                    best = k;
                }
            }
            best + 1
        })
        .collect();
    Ok((classes, probs))
}
