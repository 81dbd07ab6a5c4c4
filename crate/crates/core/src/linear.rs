//! Global-coefficient linear candidates: least squares, Mallows and jackknife
//! model averaging, and AIC/BIC selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::averaging::{
    info_criteria_from, select_min, simplex_qp, WeightVector, DEFAULT_TOLERANCE,
};
use crate::data::SpatialDataset;
use crate::error::{Result, SvmmaError};

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub columns: Vec<usize>,
    pub coefficients: DVector<f64>,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    pub hat_diagonal: DVector<f64>,
}

impl LinearFit {
    /// Number of coefficients, which is also the hat trace.
    pub fn dof(&self) -> usize {
        self.columns.len()
    }

    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    /// Predictions for rows laid out like the training covariates.
    pub fn predict(&self, covariates: &DMatrix<f64>) -> Result<DVector<f64>> {
        if let Some(&c) = self.columns.iter().find(|&&c| c >= covariates.ncols()) {
            return Err(SvmmaError::DimensionMismatch(format!(
                "column {c} missing from {} prediction columns",
                covariates.ncols()
            )));
        }
        Ok(DVector::from_fn(covariates.nrows(), |i, _| {
            self.columns
                .iter()
                .zip(self.coefficients.iter())
                .map(|(&c, b)| covariates[(i, c)] * b)
                .sum()
        }))
    }
}

/// Least squares of the response on the given columns via Householder QR.
pub fn ols_fit(ds: &SpatialDataset, columns: &[usize]) -> Result<LinearFit> {
    if columns.is_empty() {
        return Err(SvmmaError::InvalidArgument("no columns".into()));
    }
    if let Some(&c) = columns.iter().find(|&&c| c >= ds.p()) {
        return Err(SvmmaError::InvalidArgument(format!(
            "column {c} out of range"
        )));
    }
    let n = ds.n();
    let k = columns.len();
    if k > n {
        return Err(SvmmaError::RankDeficient(format!(
            "{k} columns for {n} rows"
        )));
    }
    let x = ds.covariates().select_columns(columns);
    let y = ds.response();
    let qr = x.qr();
    let r = qr.r();
    let q = qr.q();
    let diag_max = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..k).any(|j| !(r[(j, j)].abs() > RANK_TOL * diag_max)) {
        return Err(SvmmaError::RankDeficient(format!("columns {columns:?}")));
    }
    let qty = q.transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| SvmmaError::RankDeficient(format!("columns {columns:?}")))?;
    let fitted = &q * &qty;
    let residuals = y - &fitted;
    let hat_diagonal = DVector::from_fn(n, |i, _| q.row(i).norm_squared());
    Ok(LinearFit {
        columns: columns.to_vec(),
        coefficients,
        fitted,
        residuals,
        hat_diagonal,
    })
}

fn check_fits(fits: &[LinearFit], y: &DVector<f64>) -> Result<()> {
    if fits.is_empty() {
        return Err(SvmmaError::InvalidArgument("no linear candidates".into()));
    }
    if fits.iter().any(|f| f.fitted.len() != y.len()) {
        return Err(SvmmaError::DimensionMismatch(
            "fit length differs from response".into(),
        ));
    }
    Ok(())
}

/// Mallows weights with penalty `p_m` and variance from the largest model.
pub fn mma_weights(fits: &[LinearFit], y: &DVector<f64>) -> Result<WeightVector> {
    check_fits(fits, y)?;
    let n = y.len();
    let mut largest = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.dof() > fits[largest].dof() {
            largest = i;
        }
    }
    let big = &fits[largest];
    if big.dof() >= n {
        return Err(SvmmaError::DegenerateDof {
            trace: big.dof() as f64,
            n,
        });
    }
    let residuals = y - &big.fitted;
    let sigma2 = residuals.norm_squared() / (n - big.dof()) as f64;
    let f = DMatrix::from_fn(n, fits.len(), |i, m| fits[m].fitted[i]);
    let traces = DVector::from_iterator(fits.len(), fits.iter().map(|f| f.dof() as f64));
    let h = f.transpose() * &f;
    let b = f.transpose() * y - sigma2 * traces;
    simplex_qp(&h, &b, DEFAULT_TOLERANCE)
}

/// Leave-one-out residuals `e_i / (1 - h_ii)` for one candidate.
pub fn loo_residuals(fit: &LinearFit, y: &DVector<f64>, candidate: usize) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(y.len());
    for i in 0..y.len() {
        let denom = 1.0 - fit.hat_diagonal[i];
        if !(denom.abs() > 1e-12) {
            return Err(SvmmaError::UnitLeverage { candidate, row: i });
        }
        out[i] = (y[i] - fit.fitted[i]) / denom;
    }
    Ok(out)
}

/// Jackknife weights minimizing the squared leave-one-out residuals.
pub fn jma_weights(fits: &[LinearFit], y: &DVector<f64>) -> Result<WeightVector> {
    check_fits(fits, y)?;
    let cols = fits
        .iter()
        .enumerate()
        .map(|(m, f)| loo_residuals(f, y, m))
        .collect::<Result<Vec<_>>>()?;
    let e = DMatrix::from_columns(&cols);
    let h = e.transpose() * &e;
    simplex_qp(&h, &DVector::zeros(fits.len()), DEFAULT_TOLERANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSelection {
    pub aic: usize,
    pub bic: usize,
    /// Some candidate fit the response exactly.
    pub zero_variance: bool,
}

/// Single-model selection by AIC and BIC with `p_m` as the dof.
pub fn linear_ic_select(fits: &[LinearFit], y: &DVector<f64>) -> Result<LinearSelection> {
    check_fits(fits, y)?;
    let n = y.len();
    let ics: Vec<_> = fits
        .iter()
        .map(|f| info_criteria_from((y - &f.fitted).norm_squared() / n as f64, f.dof() as f64, n))
        .collect();
    let aic: Vec<f64> = ics.iter().map(|c| c.aic).collect();
    let bic: Vec<f64> = ics.iter().map(|c| c.bic).collect();
    Ok(LinearSelection {
        aic: select_min(&aic)?,
        bic: select_min(&bic)?,
        zero_variance: ics.iter().any(|c| c.zero_variance),
    })
}
