//! End-to-end fitting and prediction on raw curves.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{cross_product_matrix, CrossProductMatrix, GaussianBasis};
use crate::error::{Error, Result};
use crate::grid::{default_lambda_grid, SmoothingGrid};
use crate::logit::{build_design_with_classes, design_rows, predict, BlockPenalty, SemiLogisticFit, DEFAULT_MAX_EM};
use crate::selection::{scan_lambda, CriterionKind, CriterionReport};
use crate::smoother::{functionalize_with_grid, smooth_with_basis, FunctionalDataset, RawCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Labeled and unlabeled curves.
    Sflda,
    /// Labeled curves only.
    Flda,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sflda => "sflda",
            Method::Flda => "flda",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sflda" => Ok(Method::Sflda),
            "flda" => Ok(Method::Flda),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub smoothing: SmoothingGrid,
    pub lambda_grid: Vec<f64>,
    pub criterion: CriterionKind,
    pub method: Method,
    pub max_em: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            smoothing: SmoothingGrid::default(),
            lambda_grid: default_lambda_grid(),
            criterion: CriterionKind::Gic,
            method: Method::Sflda,
            max_em: DEFAULT_MAX_EM,
        }
    }
}

/// A fitted classifier together with what is needed to apply it to new
/// curves.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub method: Method,
    pub data: FunctionalDataset,
    pub j: CrossProductMatrix,
    pub n_classes: usize,
    pub fit: SemiLogisticFit,
    pub report: CriterionReport,
    pub zeta_grid: Vec<f64>,
    pub m_grid: Vec<usize>,
}

impl FittedModel {
    pub fn basis(&self) -> &Arc<GaussianBasis> {
        &self.data.basis
    }

    /// Training error over the labeled curves, from the in-sample
    /// coefficients.
    pub fn training_error(&self) -> f64 {
        let labeled: Vec<usize> = (0..self.data.len()).filter(|&i| self.data.labels[i].is_some()).collect();
        let sub = self.data.subset(&labeled);
        let z = design_rows(&sub.coefficients, &self.j).expect("dimensions fixed at fit time");
        let (pred, _) = predict(&self.fit.beta, &z).expect("dimensions fixed at fit time");
        let wrong = pred.iter().zip(&sub.labels).filter(|(p, l)| Some(**p) != **l).count();
        wrong as f64 / labeled.len() as f64
    }
}

/// Smooths the curves, fits the classifier over the λ grid and keeps the
/// criterion-optimal fit. FLDA discards unlabeled curves before smoothing.
pub fn fit_curves(curves: &[RawCurve], labels: &[Option<usize>], opts: &FitOptions) -> Result<FittedModel> {
    if curves.len() != labels.len() {
        return Err(Error::invalid(format!("{} labels for {} curves", labels.len(), curves.len())));
    }
    let mut classes: Vec<usize> = labels.iter().flatten().copied().collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid(format!(
            "need labeled curves from at least 2 classes, found {}",
            classes.len()
        )));
    }
    let n_classes = *classes.last().expect("non-empty");
    if classes.len() != n_classes {
        let missing: Vec<String> = (1..=n_classes)
            .filter(|c| !classes.contains(c))
            .map(|c| c.to_string())
            .collect();
        return Err(Error::invalid(format!(
            "classes must be numbered 1..={n_classes}; no labeled curves for {}",
            missing.join(", ")
        )));
    }
    let (curves, labels): (Vec<RawCurve>, Vec<Option<usize>>) = match opts.method {
        Method::Sflda => (curves.to_vec(), labels.to_vec()),
        Method::Flda => curves
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.is_some())
            .map(|(c, l)| (c.clone(), *l))
            .unzip(),
    };
    let data = functionalize_with_grid(&curves, &labels, &opts.smoothing)?;
    let j = cross_product_matrix(&data.basis);
    let design = build_design_with_classes(&data, &j, n_classes)?;
    let penalty = BlockPenalty::identity(data.m());
    let scan = scan_lambda(&design, &penalty, &opts.lambda_grid, &[opts.criterion], opts.max_em)?;
    let (fit, report) = scan.best(opts.criterion)?;
    Ok(FittedModel {
        method: opts.method,
        data,
        j,
        n_classes,
        fit,
        report,
        zeta_grid: opts.smoothing.zeta_grid.clone(),
        m_grid: opts.smoothing.m_grid.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Predictions {
    pub curve_ids: Vec<String>,
    pub classes: Vec<usize>,
    /// `n × L` posterior probabilities.
    pub posteriors: DMatrix<f64>,
    /// Ids of curves observed outside the span of the basis knots.
    pub out_of_range: Vec<String>,
}

/// Everything a prediction needs, as persisted in a model file.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub basis: Arc<GaussianBasis>,
    pub j: CrossProductMatrix,
    pub fit_beta: crate::logit::CoefficientBlock,
    pub zeta_grid: Vec<f64>,
}

impl From<&FittedModel> for Predictor {
    fn from(m: &FittedModel) -> Self {
        Self {
            basis: Arc::clone(&m.data.basis),
            j: m.j.clone(),
            fit_beta: m.fit.beta.clone(),
            zeta_grid: m.zeta_grid.clone(),
        }
    }
}

impl Predictor {
    /// Smooths new curves on the stored basis, re-selecting ζ per curve,
    /// and classifies them.
    pub fn predict_curves(&self, curves: &[RawCurve]) -> Result<Predictions> {
        let n_classes = self.fit_beta.n_classes();
        if curves.is_empty() {
            return Ok(Predictions {
                curve_ids: Vec::new(),
                classes: Vec::new(),
                posteriors: DMatrix::zeros(0, n_classes),
                out_of_range: Vec::new(),
            });
        }
        let knots = self.basis.grid().knots();
        let (lo, hi) = (knots[0], knots[knots.len() - 1]);
        let out_of_range: Vec<String> = curves
            .iter()
            .filter(|c| c.times.iter().any(|&t| t < lo || t > hi))
            .map(|c| c.id.clone())
            .collect();
        if !out_of_range.is_empty() {
            log::warn!(
                "{} curve(s) observed outside the knot span [{lo}, {hi}], e.g. '{}'",
                out_of_range.len(),
                out_of_range[0]
            );
        }
        let data = smooth_with_basis(curves, &self.basis, &self.zeta_grid)?;
        let z = design_rows(&data.coefficients, &self.j)?;
        let (classes, posteriors) = predict(&self.fit_beta, &z)?;
        Ok(Predictions {
            curve_ids: data.curve_ids,
            classes,
            posteriors,
            out_of_range,
        })
    }
}
