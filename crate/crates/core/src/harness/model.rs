//! Versioned JSON model files.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, place_knots, CrossProductMatrix, GaussianBasis};
use crate::error::{Error, Result};
use crate::harness::pipeline::{FittedModel, Method, Predictor};
use crate::logit::CoefficientBlock;
use crate::selection::CriterionKind;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRecord {
    pub m: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub centers: Vec<f64>,
    pub width: f64,
    pub knots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRecord {
    pub kind: CriterionKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveZeta {
    pub curve_id: String,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: Method,
    pub basis: BasisRecord,
    pub m_grid: Vec<usize>,
    pub zeta_grid: Vec<f64>,
    /// ζ selected for each training curve.
    pub training_zetas: Vec<CurveZeta>,
    /// Rows of `J`.
    pub j: Vec<Vec<f64>>,
    pub n_classes: usize,
    /// `(L−1) × (m+1)`, row `k` holds `β_kᵀ` with the intercept first.
    pub beta: Vec<Vec<f64>>,
    pub lambda: f64,
    pub criterion: CriterionRecord,
    pub em_iterations: usize,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("model file: ragged {what} matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl ModelFile {
    pub fn from_fitted(model: &FittedModel) -> Self {
        let basis = model.basis();
        let grid = basis.grid();
        Self {
            format_version: FORMAT_VERSION,
            method: model.method,
            basis: BasisRecord {
                m: basis.m(),
                t_min: grid.t_min(),
                t_max: grid.t_max(),
                centers: basis.centers().to_vec(),
                width: basis.width(),
                knots: grid.knots().to_vec(),
            },
            m_grid: model.m_grid.clone(),
            zeta_grid: model.zeta_grid.clone(),
            training_zetas: model
                .data
                .curve_ids
                .iter()
                .zip(&model.data.zetas)
                .map(|(id, &zeta)| CurveZeta {
                    curve_id: id.clone(),
                    zeta,
                })
                .collect(),
            j: rows(model.j.matrix()),
            n_classes: model.n_classes,
            beta: rows(&model.fit.beta.beta),
            lambda: model.fit.lambda,
            criterion: CriterionRecord {
                kind: model.report.kind,
                value: model.report.value,
            },
            em_iterations: model.fit.em_iterations,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
        if v.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model file format version {} is not supported (expected {FORMAT_VERSION})",
                v.format_version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::io::write_text(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Rebuilds the basis from its range and size and checks it against the
    /// stored centers, width and knots.
    pub fn basis(&self) -> Result<GaussianBasis> {
        let b = &self.basis;
        let basis = build_basis(place_knots(b.t_min, b.t_max, b.m)?);
        let close = |a: f64, c: f64| (a - c).abs() <= 1e-12 * (1.0 + a.abs().max(c.abs()));
        let same = b.centers.len() == basis.centers().len()
            && b.knots.len() == basis.grid().knots().len()
            && b.centers.iter().zip(basis.centers()).all(|(a, c)| close(*a, *c))
            && b.knots.iter().zip(basis.grid().knots()).all(|(a, c)| close(*a, *c))
            && close(b.width, basis.width());
        if !same {
            return Err(Error::Format(
                "model file: stored centers, width or knots disagree with the basis range".into(),
            ));
        }
        Ok(basis)
    }

    pub fn predictor(&self) -> Result<Predictor> {
        let basis = self.basis()?;
        let m = basis.m();
        let j = from_rows(&self.j, "J")?;
        if j.shape() != (m, m) {
            return Err(Error::Format(format!("model file: J is {:?}, expected {m}x{m}", j.shape())));
        }
        let beta = from_rows(&self.beta, "beta")?;
        if self.n_classes < 2 || beta.shape() != (self.n_classes - 1, m + 1) {
            return Err(Error::Format(format!(
                "model file: beta is {:?}, expected {}x{}",
                beta.shape(),
                self.n_classes.saturating_sub(1),
                m + 1
            )));
        }
        Ok(Predictor {
            basis: Arc::new(basis),
            j: CrossProductMatrix::from_matrix(j)?,
            fit_beta: CoefficientBlock { beta },
            zeta_grid: self.zeta_grid.clone(),
        })
    }
}
