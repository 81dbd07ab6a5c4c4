//! Mallows-criterion weights, information-criterion selection and smoothing,
//! and weighted combination of candidate predictions.

mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvmmaError};
use crate::gwr::FittedCandidate;

pub use qp::{project_simplex, DEFAULT_TOLERANCE, MAX_ITERATIONS};

const SIMPLEX_TOL: f64 = 1e-10;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(SvmmaError::InvalidArgument("empty weight vector".into()));
        }
        if w.iter()
            .any(|v| !v.is_finite() || *v < -SIMPLEX_TOL || *v > 1.0 + SIMPLEX_TOL)
        {
            return Err(SvmmaError::InvalidArgument(format!(
                "weights outside [0, 1]: {w:?}"
            )));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(SvmmaError::InvalidArgument(format!(
                "weights sum to {s}, not 1"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    /// Indicator of candidate `index`.
    pub fn unit(m: usize, index: usize) -> Self {
        let mut w = vec![0.0; m];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = SvmmaError;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `||y - F w||^2 + 2 sigma2 traces' w` as a function of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MallowsProblem {
    f: DMatrix<f64>,
    y: DVector<f64>,
    traces: DVector<f64>,
    sigma2: f64,
}

impl MallowsProblem {
    pub fn new(
        f: DMatrix<f64>,
        y: DVector<f64>,
        traces: DVector<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        if f.nrows() != y.len() || f.ncols() != traces.len() || f.ncols() == 0 {
            return Err(SvmmaError::DimensionMismatch(format!(
                "F is {}x{}, y has {}, traces has {}",
                f.nrows(),
                f.ncols(),
                y.len(),
                traces.len()
            )));
        }
        if f.iter()
            .chain(y.iter())
            .chain(traces.iter())
            .any(|v| !v.is_finite())
            || !sigma2.is_finite()
        {
            return Err(SvmmaError::NonFiniteInput("Mallows problem".into()));
        }
        if sigma2 < 0.0 {
            return Err(SvmmaError::InvalidArgument(format!(
                "negative variance {sigma2}"
            )));
        }
        Ok(Self {
            f,
            y,
            traces,
            sigma2,
        })
    }

    pub fn fitted(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn traces(&self) -> &DVector<f64> {
        &self.traces
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.traces.len()
    }

    /// `(H, b)` with the criterion equal to `y'y + w'Hw - 2b'w`.
    pub fn quadratic(&self) -> (DMatrix<f64>, DVector<f64>) {
        let h = self.f.transpose() * &self.f;
        let b = self.f.transpose() * &self.y - self.sigma2 * &self.traces;
        (h, b)
    }
}

pub fn criterion_value(mp: &MallowsProblem, w: &WeightVector) -> Result<f64> {
    if w.len() != mp.m() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{} weights for {} candidates",
            w.len(),
            mp.m()
        )));
    }
    let wv = w.to_dvector();
    let resid = &mp.y - &mp.f * &wv;
    Ok(resid.norm_squared() + 2.0 * mp.sigma2 * mp.traces.dot(&wv))
}

/// Minimizes `w' H w - 2 b' w` over the simplex.
pub fn simplex_qp(h: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<WeightVector> {
    let w = qp::simplex_qp(h, b, tol)?;
    Ok(WeightVector(w.iter().cloned().collect()))
}

/// Mallows-optimal weights.
pub fn solve_weights(mp: &MallowsProblem) -> Result<WeightVector> {
    let (h, b) = mp.quadratic();
    simplex_qp(&h, &b, DEFAULT_TOLERANCE)
}

/// Source of the variance in the Mallows penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum VarianceMode {
    /// Adjusted-dof residual variance of the largest candidate.
    PlugIn,
    Known(f64),
}

/// Index of the candidate with the most columns, ties to the larger hat
/// trace and then to the earlier index.
pub fn largest_candidate(fits: &[FittedCandidate]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, f) in fits.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (db, di) = (fits[b].model().dim(), f.model().dim());
                if di > db || (di == db && f.hat_trace() > fits[b].hat_trace()) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Assembles the criterion from fitted candidates sharing one training set.
pub fn feasible_problem(fits: &[FittedCandidate], mode: VarianceMode) -> Result<MallowsProblem> {
    let largest = largest_candidate(fits)
        .ok_or_else(|| SvmmaError::InvalidArgument("no fitted candidates".into()))?;
    let ds = fits[0].training();
    let n = ds.n();
    for f in fits {
        if f.fitted().len() != n {
            return Err(SvmmaError::DimensionMismatch(
                "candidates fitted on different data".into(),
            ));
        }
    }
    let sigma2 = match mode {
        VarianceMode::PlugIn => fits[largest].sigma2_adjusted()?,
        VarianceMode::Known(s) => s,
    };
    let f = DMatrix::from_fn(n, fits.len(), |i, m| fits[m].fitted()[i]);
    let traces = DVector::from_iterator(fits.len(), fits.iter().map(|f| f.hat_trace()));
    MallowsProblem::new(f, ds.response().clone(), traces, sigma2)
}

/// AIC, BIC and AICc with `sigma2 = ||y - mu||^2 / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub aic: f64,
    pub bic: f64,
    pub aicc: f64,
    /// Residual variance was exactly zero, so the log term is `-inf`.
    pub zero_variance: bool,
}

/// Criteria from the naive residual variance, effective dof and sample size.
pub fn info_criteria_from(sigma2: f64, trace: f64, n: usize) -> InfoCriteria {
    let nf = n as f64;
    let zero_variance = sigma2 == 0.0;
    let log_s = if zero_variance {
        f64::NEG_INFINITY
    } else {
        sigma2.ln()
    };
    let aicc = if trace >= nf - 2.0 {
        f64::INFINITY
    } else {
        log_s + (nf + trace) / (nf - trace - 2.0)
    };
    InfoCriteria {
        aic: log_s + 2.0 * trace / nf,
        bic: log_s + trace * nf.ln() / nf,
        aicc,
        zero_variance,
    }
}

pub fn info_criteria(fit: &FittedCandidate) -> InfoCriteria {
    info_criteria_from(fit.sigma2_naive(), fit.hat_trace(), fit.training().n())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothedKind {
    Saic,
    Sbic,
}

impl SmoothedKind {
    pub fn scores(self, ics: &[InfoCriteria]) -> Vec<f64> {
        ics.iter()
            .map(|ic| match self {
                SmoothedKind::Saic => ic.aic,
                SmoothedKind::Sbic => ic.bic,
            })
            .collect()
    }
}

/// Weights proportional to `exp(-score / 2)`. Candidates at `-inf` share
/// all the weight; candidates at `+inf` get none.
pub fn smoothed_weights(scores: &[f64]) -> Result<WeightVector> {
    if scores.is_empty() {
        return Err(SvmmaError::InvalidArgument("no scores".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SvmmaError::NonFiniteInput("NaN score".into()));
    }
    let m = scores.len();
    let neg_inf = scores.iter().filter(|s| **s == f64::NEG_INFINITY).count();
    if neg_inf > 0 {
        let share = 1.0 / neg_inf as f64;
        return Ok(WeightVector(
            scores
                .iter()
                .map(|&s| if s == f64::NEG_INFINITY { share } else { 0.0 })
                .collect(),
        ));
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == f64::INFINITY {
        return Err(SvmmaError::AllScoresInfinite);
    }
    let raw: Vec<f64> = scores.iter().map(|&s| (-(s - min) / 2.0).exp()).collect();
    let total: f64 = raw.iter().sum();
    debug_assert!(raw.len() == m && total >= 1.0);
    Ok(WeightVector(raw.into_iter().map(|v| v / total).collect()))
}

/// Index of the smallest score, ties to the smaller index.
pub fn select_min(scores: &[f64]) -> Result<usize> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SvmmaError::NonFiniteInput("NaN score".into()));
    }
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s < f64::INFINITY && best.is_none_or(|b| s < scores[b]) {
            best = Some(i);
        }
    }
    best.ok_or(SvmmaError::AllScoresInfinite)
}

/// Total weight on flagged candidates.
pub fn tau_sum(w: &WeightVector, flags: &[bool]) -> Result<f64> {
    if w.len() != flags.len() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{} weights for {} flags",
            w.len(),
            flags.len()
        )));
    }
    Ok(w.0
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(v, _)| v)
        .sum())
}

/// `predictions * w` for a `k x M` prediction matrix.
pub fn combine_predictions(w: &WeightVector, predictions: &DMatrix<f64>) -> Result<DVector<f64>> {
    if predictions.ncols() != w.len() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{} prediction columns for {} weights",
            predictions.ncols(),
            w.len()
        )));
    }
    Ok(predictions * w.to_dvector())
}

/// One row of a weight report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub model: usize,
    pub columns: Vec<usize>,
    pub weight: f64,
    pub trace: f64,
}
