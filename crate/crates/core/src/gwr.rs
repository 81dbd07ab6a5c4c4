//! Local-constant geographically weighted regression for a single candidate
//! model.
//!
//! At a target location `s` the coefficients solve the kernel-weighted normal
//! equations `(X' W_s X) beta = X' W_s y`. Stacking the fits at the training
//! locations gives the hat matrix `P`, whose diagonal is
//! `K_h(0) x_i' (X' W_{s_i} X)^{-1} x_i`, so traces never need the full matrix.
//!
//! Bandwidth search goes through [`MomentTable`], which stores the weighted
//! cross-products at every training location for one bandwidth over a set of
//! columns. Every candidate whose columns are a subset reads its local system
//! from the table, so all-subsets searches pay for the `O(n^2 p^2)`
//! accumulation once per grid point instead of once per candidate.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::SpatialDataset;
use crate::error::{Result, SvmmaError};
use crate::kernels::{check_bandwidth, max_extent, DistanceCache, DistanceSpec, Kernel};
use crate::linalg::{cholesky_in_place, cholesky_solve};

/// Column subset plus smoothing settings for one candidate.
///
/// `columns` are 0-based indices into the dataset's covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub columns: Vec<usize>,
    pub kernel: Kernel,
    pub distance: DistanceSpec,
    pub bandwidth: Option<f64>,
}

impl CandidateModel {
    pub fn new(
        columns: Vec<usize>,
        kernel: impl Into<Kernel>,
        distance: DistanceSpec,
    ) -> Result<Self> {
        if columns.is_empty() {
            return Err(SvmmaError::InvalidArgument(
                "candidate with no columns".into(),
            ));
        }
        let mut sorted = columns.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(SvmmaError::InvalidArgument(format!(
                "duplicate column in candidate {columns:?}"
            )));
        }
        Ok(Self {
            columns,
            kernel: kernel.into(),
            distance,
            bandwidth: None,
        })
    }

    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.bandwidth = Some(h);
        self
    }

    /// Number of coefficients `p_m`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn validate_for(&self, p: usize) -> Result<()> {
        if let Some(&c) = self.columns.iter().find(|&&c| c >= p) {
            return Err(SvmmaError::InvalidArgument(format!(
                "candidate column {c} out of range for p = {p}"
            )));
        }
        Ok(())
    }

    fn require_bandwidth(&self) -> Result<f64> {
        let h = self
            .bandwidth
            .ok_or_else(|| SvmmaError::InvalidArgument("candidate bandwidth is unset".into()))?;
        check_bandwidth(h)?;
        Ok(h)
    }
}

/// Row-major copy of a set of covariate columns.
#[derive(Debug, Clone)]
struct RowMajor {
    dim: usize,
    data: Vec<f64>,
}

impl RowMajor {
    fn new(x: &DMatrix<f64>, columns: &[usize]) -> Self {
        let dim = columns.len();
        let mut data = Vec::with_capacity(x.nrows() * dim);
        for i in 0..x.nrows() {
            data.extend(columns.iter().map(|&c| x[(i, c)]));
        }
        Self { dim, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Accumulates the upper triangle of `sum_i w_i x_i x_i'` and `sum_i w_i x_i y_i`.
///
/// Entry `(a, b)` is summed over rows in ascending order regardless of which
/// other columns are present, so tables over different column sets agree
/// bitwise on shared entries.
#[inline]
fn accumulate(
    rows: &RowMajor,
    y: &[f64],
    weights: &[f64],
    gram: &mut [f64],
    rhs: &mut [f64],
) -> usize {
    let dim = rows.dim;
    let mut support = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        support += 1;
        let x = rows.row(i);
        for a in 0..dim {
            let wa = w * x[a];
            let g = &mut gram[a * dim..(a + 1) * dim];
            for b in a..dim {
                g[b] += wa * x[b];
            }
            rhs[a] += wa * y[i];
        }
    }
    support
}

/// Weighted local cross-products at every training location, for one kernel,
/// distance and bandwidth, over a fixed set of columns.
#[derive(Debug, Clone)]
pub struct MomentTable {
    columns: Vec<usize>,
    kernel: Kernel,
    distance: DistanceSpec,
    bandwidth: f64,
    dim: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    support: Vec<usize>,
    self_weight: f64,
    rows: Arc<RowMajor>,
}

impl MomentTable {
    pub fn build(
        ds: &SpatialDataset,
        columns: &[usize],
        kernel: Kernel,
        distance: DistanceSpec,
        bandwidth: f64,
        cache: Option<&DistanceCache>,
    ) -> Result<Self> {
        let rows = Arc::new(RowMajor::new(ds.covariates(), columns));
        Self::build_with_rows(ds, columns, rows, kernel, distance, bandwidth, cache)
    }

    fn build_with_rows(
        ds: &SpatialDataset,
        columns: &[usize],
        rows: Arc<RowMajor>,
        kernel: Kernel,
        distance: DistanceSpec,
        bandwidth: f64,
        cache: Option<&DistanceCache>,
    ) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let n = ds.n();
        let dim = columns.len();
        let locs = ds.locations();
        let y = ds.response().as_slice();
        let mut gram = vec![0.0; n * dim * dim];
        let mut rhs = vec![0.0; n * dim];
        let mut support = vec![0; n];
        let mut weights = vec![0.0; n];
        for l in 0..n {
            match cache {
                Some(c) => {
                    for (w, &d) in weights.iter_mut().zip(c.row(l)) {
                        *w = kernel.scaled_at(bandwidth, d);
                    }
                }
                None => {
                    for (w, &si) in weights.iter_mut().zip(locs) {
                        *w = kernel.scaled_at(bandwidth, distance.eval(si, locs[l]));
                    }
                }
            }
            support[l] = accumulate(
                &rows,
                y,
                &weights,
                &mut gram[l * dim * dim..(l + 1) * dim * dim],
                &mut rhs[l * dim..(l + 1) * dim],
            );
        }
        Ok(Self {
            columns: columns.to_vec(),
            kernel,
            distance,
            bandwidth,
            dim,
            gram,
            rhs,
            support,
            self_weight: kernel.scaled_at(bandwidth, 0.0),
            rows,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n(&self) -> usize {
        self.support.len()
    }

    /// Positions of `model.columns` inside this table's column list.
    fn positions(&self, model: &CandidateModel) -> Result<Vec<usize>> {
        if model.kernel != self.kernel || model.distance != self.distance {
            return Err(SvmmaError::InvalidArgument(
                "candidate smoothing settings differ from the moment table".into(),
            ));
        }
        model
            .columns
            .iter()
            .map(|c| {
                self.columns.iter().position(|t| t == c).ok_or_else(|| {
                    SvmmaError::InvalidArgument(format!("column {c} not in moment table"))
                })
            })
            .collect()
    }

    /// Loads the local system at location `l` for the given positions into
    /// `a` (lower triangle, row-major `k x k`) and `b`. With `leave_out` the
    /// contribution of row `l` itself is removed.
    #[inline]
    fn load(&self, l: usize, pos: &[usize], leave_out: Option<f64>, a: &mut [f64], b: &mut [f64]) {
        let k = pos.len();
        let dim = self.dim;
        let g = &self.gram[l * dim * dim..(l + 1) * dim * dim];
        let r = &self.rhs[l * dim..(l + 1) * dim];
        for (ri, &pr) in pos.iter().enumerate() {
            for (ci, &pc) in pos[..=ri].iter().enumerate() {
                let (lo, hi) = if pr <= pc { (pr, pc) } else { (pc, pr) };
                a[ri * k + ci] = g[lo * dim + hi];
            }
            b[ri] = r[pr];
        }
        if let Some(y_l) = leave_out {
            let x = self.rows.row(l);
            let w = self.self_weight;
            for (ri, &pr) in pos.iter().enumerate() {
                let wx = w * x[pr];
                for (ci, &pc) in pos[..=ri].iter().enumerate() {
                    a[ri * k + ci] -= wx * x[pc];
                }
                b[ri] -= wx * y_l;
            }
        }
    }

    fn singular(&self, ds: &SpatialDataset, l: usize, dim: usize) -> SvmmaError {
        SvmmaError::SingularLocalFit {
            location: ds.locations()[l],
            bandwidth: self.bandwidth,
            support: self.support[l],
            dim,
            index: Some(l),
        }
    }

    /// In-sample fitted values and hat diagonal for a candidate.
    pub fn fit(&self, ds: &SpatialDataset, model: &CandidateModel) -> Result<(Vec<f64>, Vec<f64>)> {
        let pos = self.positions(model)?;
        let k = pos.len();
        let mut a = vec![0.0; k * k];
        let mut b = vec![0.0; k];
        let mut z = vec![0.0; k];
        let n = self.n();
        let mut fitted = vec![0.0; n];
        let mut hat = vec![0.0; n];
        for l in 0..n {
            if self.support[l] < k {
                return Err(self.singular(ds, l, k));
            }
            self.load(l, &pos, None, &mut a, &mut b);
            if !cholesky_in_place(&mut a, k) {
                return Err(self.singular(ds, l, k));
            }
            cholesky_solve(&a, k, &mut b);
            let x = self.rows.row(l);
            for (zi, &p) in z.iter_mut().zip(&pos) {
                *zi = x[p];
            }
            cholesky_solve(&a, k, &mut z);
            let mut f = 0.0;
            let mut q = 0.0;
            for (i, &p) in pos.iter().enumerate() {
                f += x[p] * b[i];
                q += x[p] * z[i];
            }
            fitted[l] = f;
            hat[l] = self.self_weight * q;
        }
        Ok((fitted, hat))
    }

    /// Leave-one-out predictions at each training location, or `None` if any
    /// leave-one-out system is singular.
    pub fn loo_predictions(
        &self,
        ds: &SpatialDataset,
        model: &CandidateModel,
        method: LoocvMethod,
    ) -> Result<Option<Vec<f64>>> {
        let y = ds.response().as_slice();
        match method {
            LoocvMethod::Refit => {
                let pos = self.positions(model)?;
                let k = pos.len();
                let mut a = vec![0.0; k * k];
                let mut b = vec![0.0; k];
                let mut out = vec![0.0; self.n()];
                for l in 0..self.n() {
                    let self_counted = usize::from(self.self_weight > 0.0);
                    if self.support[l] < k + self_counted {
                        return Ok(None);
                    }
                    self.load(l, &pos, Some(y[l]), &mut a, &mut b);
                    if !cholesky_in_place(&mut a, k) {
                        return Ok(None);
                    }
                    cholesky_solve(&a, k, &mut b);
                    let x = self.rows.row(l);
                    out[l] = pos.iter().enumerate().map(|(i, &p)| x[p] * b[i]).sum();
                }
                Ok(Some(out))
            }
            LoocvMethod::Leverage => {
                let (fitted, hat) = match self.fit(ds, model) {
                    Ok(v) => v,
                    Err(SvmmaError::SingularLocalFit { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let mut out = vec![0.0; self.n()];
                for l in 0..self.n() {
                    let denom = 1.0 - hat[l];
                    if !(denom.abs() > 1e-12) {
                        return Ok(None);
                    }
                    out[l] = (fitted[l] - hat[l] * y[l]) / denom;
                }
                Ok(Some(out))
            }
        }
    }

    /// Leave-one-out CV score, `+inf` when some leave-one-out fit is singular.
    pub fn cv_score(
        &self,
        ds: &SpatialDataset,
        model: &CandidateModel,
        method: LoocvMethod,
    ) -> Result<f64> {
        let y = ds.response().as_slice();
        Ok(match self.loo_predictions(ds, model, method)? {
            Some(pred) => pred.iter().zip(y).map(|(p, y)| (y - p) * (y - p)).sum(),
            None => f64::INFINITY,
        })
    }
}

/// How leave-one-out predictions are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoocvMethod {
    /// Solve each local system with row `i` removed.
    #[default]
    Refit,
    /// `(mu_i - P_ii y_i) / (1 - P_ii)` from the full fit.
    Leverage,
}

impl std::str::FromStr for LoocvMethod {
    type Err = SvmmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "refit" => Ok(Self::Refit),
            "leverage" => Ok(Self::Leverage),
            other => Err(SvmmaError::InvalidArgument(format!(
                "unknown LOOCV method `{other}` (expected refit or leverage)"
            ))),
        }
    }
}

/// Local coefficients `beta_(m)(s)`.
pub fn fit_local(ds: &SpatialDataset, cm: &CandidateModel, s: [f64; 2]) -> Result<DVector<f64>> {
    let h = cm.require_bandwidth()?;
    cm.validate_for(ds.p())?;
    let (a, b, support) = local_system(ds, cm, h, s);
    let k = cm.dim();
    solve_local(a, b, k).ok_or(SvmmaError::SingularLocalFit {
        location: s,
        bandwidth: h,
        support,
        dim: k,
        index: None,
    })
}

fn local_system(
    ds: &SpatialDataset,
    cm: &CandidateModel,
    h: f64,
    s: [f64; 2],
) -> (Vec<f64>, Vec<f64>, usize) {
    let rows = RowMajor::new(ds.covariates(), &cm.columns);
    let weights: Vec<f64> = ds
        .locations()
        .iter()
        .map(|&si| cm.kernel.scaled_at(h, cm.distance.eval(si, s)))
        .collect();
    let k = cm.dim();
    let mut upper = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    let support = accumulate(
        &rows,
        ds.response().as_slice(),
        &weights,
        &mut upper,
        &mut b,
    );
    // Mirror into the lower triangle read by the factorization.
    for r in 0..k {
        for c in 0..r {
            upper[r * k + c] = upper[c * k + r];
        }
    }
    (upper, b, support)
}

fn solve_local(mut a: Vec<f64>, mut b: Vec<f64>, k: usize) -> Option<DVector<f64>> {
    if !cholesky_in_place(&mut a, k) {
        return None;
    }
    cholesky_solve(&a, k, &mut b);
    Some(DVector::from_vec(b))
}

/// Row `i` of the hat matrix.
pub fn hat_row(ds: &SpatialDataset, cm: &CandidateModel, i: usize) -> Result<DVector<f64>> {
    let h = cm.require_bandwidth()?;
    cm.validate_for(ds.p())?;
    if i >= ds.n() {
        return Err(SvmmaError::InvalidArgument(format!("row {i} out of range")));
    }
    let s = ds.locations()[i];
    let (mut a, _, support) = local_system(ds, cm, h, s);
    let k = cm.dim();
    let singular = SvmmaError::SingularLocalFit {
        location: s,
        bandwidth: h,
        support,
        dim: k,
        index: Some(i),
    };
    if !cholesky_in_place(&mut a, k) {
        return Err(singular);
    }
    let x = ds.covariates();
    let mut z: Vec<f64> = cm.columns.iter().map(|&c| x[(i, c)]).collect();
    cholesky_solve(&a, k, &mut z);
    Ok(DVector::from_iterator(
        ds.n(),
        ds.locations().iter().enumerate().map(|(j, &sj)| {
            let w = cm.kernel.scaled_at(h, cm.distance.eval(sj, s));
            let xz: f64 = cm
                .columns
                .iter()
                .zip(&z)
                .map(|(&c, zc)| x[(j, c)] * zc)
                .sum();
            w * xz
        }),
    ))
}

/// A candidate fitted on a training set.
#[derive(Debug, Clone)]
pub struct FittedCandidate {
    model: CandidateModel,
    fitted: DVector<f64>,
    hat_diagonal: DVector<f64>,
    hat_trace: f64,
    hat_matrix: Option<DMatrix<f64>>,
    training: Arc<SpatialDataset>,
}

impl FittedCandidate {
    pub fn model(&self) -> &CandidateModel {
        &self.model
    }

    pub fn bandwidth(&self) -> f64 {
        self.model
            .bandwidth
            .expect("fitted candidates carry a bandwidth")
    }

    pub fn fitted(&self) -> &DVector<f64> {
        &self.fitted
    }

    pub fn hat_diagonal(&self) -> &DVector<f64> {
        &self.hat_diagonal
    }

    /// Effective degrees of freedom `tr(P)`.
    pub fn hat_trace(&self) -> f64 {
        self.hat_trace
    }

    pub fn hat_matrix(&self) -> Option<&DMatrix<f64>> {
        self.hat_matrix.as_ref()
    }

    pub fn training(&self) -> &Arc<SpatialDataset> {
        &self.training
    }

    pub fn residuals(&self) -> DVector<f64> {
        self.training.response() - &self.fitted
    }

    pub fn rss(&self) -> f64 {
        self.residuals().norm_squared()
    }

    /// `n^-1 ||y - mu||^2`.
    pub fn sigma2_naive(&self) -> f64 {
        self.rss() / self.training.n() as f64
    }

    /// `(n - tr P)^-1 ||y - mu||^2`.
    pub fn sigma2_adjusted(&self) -> Result<f64> {
        let n = self.training.n();
        let dof = n as f64 - self.hat_trace;
        if !(dof > 0.0) {
            return Err(SvmmaError::DegenerateDof {
                trace: self.hat_trace,
                n,
            });
        }
        Ok(self.rss() / dof)
    }

    /// Coefficient field `beta_(m)(s)` from the training data.
    pub fn coefficients_at(&self, s: [f64; 2]) -> Result<DVector<f64>> {
        fit_local(&self.training, &self.model, s)
    }

    /// Predictions at new locations. `new_covariates` has the training
    /// dataset's full column layout.
    pub fn predict_at(
        &self,
        new_locations: &[[f64; 2]],
        new_covariates: &DMatrix<f64>,
    ) -> Result<DVector<f64>> {
        predict_at(self, new_locations, new_covariates)
    }
}

fn assemble(
    ds: &Arc<SpatialDataset>,
    model: CandidateModel,
    fitted: Vec<f64>,
    hat: Vec<f64>,
    hat_matrix: Option<DMatrix<f64>>,
) -> FittedCandidate {
    let hat_trace = hat.iter().sum();
    FittedCandidate {
        model,
        fitted: DVector::from_vec(fitted),
        hat_diagonal: DVector::from_vec(hat),
        hat_trace,
        hat_matrix,
        training: Arc::clone(ds),
    }
}

/// Fits a candidate at its bandwidth on every training location.
pub fn fit_candidate(
    ds: &Arc<SpatialDataset>,
    cm: &CandidateModel,
    materialize_hat: bool,
) -> Result<FittedCandidate> {
    let h = cm.require_bandwidth()?;
    cm.validate_for(ds.p())?;
    let table = MomentTable::build(ds, &cm.columns, cm.kernel, cm.distance, h, None)?;
    let (fitted, hat) = table.fit(ds, cm)?;
    let hat_matrix = if materialize_hat {
        let n = ds.n();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            p.set_row(i, &hat_row(ds, cm, i)?.transpose());
        }
        Some(p)
    } else {
        None
    };
    Ok(assemble(ds, cm.clone(), fitted, hat, hat_matrix))
}

/// Out-of-sample predictions `x_new' beta_(m)(s_new)` from the training data.
pub fn predict_at(
    fc: &FittedCandidate,
    new_locations: &[[f64; 2]],
    new_covariates: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let k = new_locations.len();
    if new_covariates.nrows() != k {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{k} locations but {} covariate rows",
            new_covariates.nrows()
        )));
    }
    if k > 0 && new_covariates.ncols() != fc.training.p() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{} covariate columns, training has {}",
            new_covariates.ncols(),
            fc.training.p()
        )));
    }
    let mut out = DVector::zeros(k);
    for (j, &s) in new_locations.iter().enumerate() {
        let beta = fc.coefficients_at(s).map_err(|e| match e {
            SvmmaError::SingularLocalFit {
                location,
                bandwidth,
                support,
                dim,
                ..
            } => SvmmaError::SingularLocalFit {
                location,
                bandwidth,
                support,
                dim,
                index: Some(j),
            },
            other => other,
        })?;
        out[j] = fc
            .model
            .columns
            .iter()
            .zip(beta.iter())
            .map(|(&c, b)| new_covariates[(j, c)] * b)
            .sum();
    }
    Ok(out)
}

/// Adjusted-dof residual variance of the largest candidate.
pub fn sigma2_largest(ds: &Arc<SpatialDataset>, cm_largest: &CandidateModel) -> Result<f64> {
    fit_candidate(ds, cm_largest, false)?.sigma2_adjusted()
}

pub fn sigma2_naive(fc: &FittedCandidate, y: &DVector<f64>) -> Result<f64> {
    if y.len() != fc.fitted.len() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "response of length {} for {} fitted values",
            y.len(),
            fc.fitted.len()
        )));
    }
    Ok((y - &fc.fitted).norm_squared() / y.len() as f64)
}

/// Search grid for bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthGrid {
    /// `points` log-spaced values from `lower` to `upper` times the largest
    /// pairwise distance between training locations.
    Relative {
        points: usize,
        lower: f64,
        upper: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
}

impl Default for BandwidthGrid {
    fn default() -> Self {
        BandwidthGrid::Relative {
            points: 30,
            lower: 0.05,
            upper: 2.0,
        }
    }
}

impl BandwidthGrid {
    /// Parses `rel:POINTS:LOWER:UPPER` or `list:H1,H2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || SvmmaError::InvalidArgument(format!("bad bandwidth grid `{spec}`"));
        if let Some(rest) = spec.strip_prefix("rel:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Self::Relative {
                points: parts[0].parse().map_err(|_| bad())?,
                lower: parts[1].parse().map_err(|_| bad())?,
                upper: parts[2].parse().map_err(|_| bad())?,
            })
        } else if let Some(rest) = spec.strip_prefix("list:") {
            let values = rest
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            Ok(Self::Explicit { values })
        } else {
            Err(bad())
        }
    }

    /// Concrete bandwidths for a dataset, sorted ascending.
    pub fn resolve(&self, locations: &[[f64; 2]], distance: DistanceSpec) -> Result<Vec<f64>> {
        let mut values = match self {
            BandwidthGrid::Relative {
                points,
                lower,
                upper,
            } => {
                if *points == 0 || !(*lower > 0.0) || !(upper >= lower) {
                    return Err(SvmmaError::InvalidArgument(format!(
                        "relative grid needs points >= 1 and 0 < lower <= upper, got {points}, {lower}, {upper}"
                    )));
                }
                let extent = max_extent(locations, distance);
                if !(extent > 0.0) {
                    return Err(SvmmaError::InvalidArgument(
                        "all locations coincide; relative bandwidth grid is empty".into(),
                    ));
                }
                log_space(lower * extent, upper * extent, *points)
            }
            BandwidthGrid::Explicit { values } => values.clone(),
        };
        if values.is_empty() {
            return Err(SvmmaError::InvalidArgument("empty bandwidth grid".into()));
        }
        for &h in &values {
            check_bandwidth(h)?;
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(values)
    }
}

fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Outcome of a leave-one-out bandwidth search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    /// Grid in ascending order.
    pub grid: Vec<f64>,
    /// CV score per grid point; `+inf` where some fit was singular.
    pub cv_values: Vec<f64>,
}

/// Tracks the running CV minimum over an ascending grid. Later grid points
/// replace the incumbent only on a strict improvement beyond a rounding
/// tolerance, so near-ties go to the smaller bandwidth.
#[derive(Debug, Clone, Copy)]
struct RunningBest {
    index: Option<usize>,
    value: f64,
    floor: f64,
}

impl RunningBest {
    fn new(y: &DVector<f64>) -> Self {
        Self {
            index: None,
            value: f64::INFINITY,
            floor: 1e-14 * y.norm_squared().max(f64::MIN_POSITIVE),
        }
    }

    fn offer(&mut self, index: usize, cv: f64) -> bool {
        if !cv.is_finite() {
            return false;
        }
        let better = match self.index {
            None => true,
            Some(_) => cv < self.value - (1e-12 * self.value.abs() + self.floor),
        };
        if better {
            self.index = Some(index);
            self.value = cv;
        }
        better
    }
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(SvmmaError::InvalidArgument("empty bandwidth grid".into()));
    }
    for &h in grid {
        check_bandwidth(h)?;
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Leave-one-out CV bandwidth for one candidate.
pub fn loocv_bandwidth(
    ds: &SpatialDataset,
    cm: &CandidateModel,
    grid: &[f64],
) -> Result<BandwidthSelection> {
    loocv_bandwidth_with(ds, cm, grid, LoocvMethod::Refit)
}

pub fn loocv_bandwidth_with(
    ds: &SpatialDataset,
    cm: &CandidateModel,
    grid: &[f64],
    method: LoocvMethod,
) -> Result<BandwidthSelection> {
    cm.validate_for(ds.p())?;
    let grid = sorted_grid(grid)?;
    let cache = DistanceCache::new(ds.locations(), cm.distance);
    let mut best = RunningBest::new(ds.response());
    let mut cv_values = Vec::with_capacity(grid.len());
    for (g, &h) in grid.iter().enumerate() {
        let table = MomentTable::build(ds, &cm.columns, cm.kernel, cm.distance, h, Some(&cache))?;
        let cv = table.cv_score(ds, cm, method)?;
        best.offer(g, cv);
        cv_values.push(cv);
    }
    let index = best.index.ok_or(SvmmaError::NoValidBandwidth(grid.len()))?;
    Ok(BandwidthSelection {
        bandwidth: grid[index],
        grid,
        cv_values,
    })
}

/// Above this many locations the pairwise distance cache is skipped.
const DISTANCE_CACHE_LIMIT: usize = 5000;

/// Selects a CV bandwidth for every candidate and fits each at its chosen
/// bandwidth. Candidates sharing a kernel and distance share one moment
/// table per grid point. Results match [`loocv_bandwidth`] followed by
/// [`fit_candidate`] candidate by candidate.
pub fn select_and_fit(
    ds: &Arc<SpatialDataset>,
    models: &[CandidateModel],
    grid: &[f64],
    method: LoocvMethod,
) -> Result<Vec<(BandwidthSelection, FittedCandidate)>> {
    let grid = sorted_grid(grid)?;
    for m in models {
        m.validate_for(ds.p())?;
    }
    let mut out: Vec<Option<(BandwidthSelection, FittedCandidate)>> = vec![None; models.len()];

    // Group candidates by smoothing settings.
    let mut groups: Vec<(Kernel, DistanceSpec, Vec<usize>)> = Vec::new();
    for (i, m) in models.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|(k, d, _)| *k == m.kernel && *d == m.distance)
        {
            Some(g) => g.2.push(i),
            None => groups.push((m.kernel, m.distance, vec![i])),
        }
    }

    for (kernel, distance, members) in groups {
        let mut universe: Vec<usize> = members
            .iter()
            .flat_map(|&i| models[i].columns.iter().cloned())
            .collect();
        universe.sort_unstable();
        universe.dedup();
        let rows = Arc::new(RowMajor::new(ds.covariates(), &universe));
        let cache =
            (ds.n() <= DISTANCE_CACHE_LIMIT).then(|| DistanceCache::new(ds.locations(), distance));

        let mut best: Vec<RunningBest> = members
            .iter()
            .map(|_| RunningBest::new(ds.response()))
            .collect();
        let mut fits: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; members.len()];
        let mut cvs: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); members.len()];

        for (g, &h) in grid.iter().enumerate() {
            let table = MomentTable::build_with_rows(
                ds,
                &universe,
                Arc::clone(&rows),
                kernel,
                distance,
                h,
                cache.as_ref(),
            )?;
            for (slot, &i) in members.iter().enumerate() {
                let cv = table.cv_score(ds, &models[i], method)?;
                cvs[slot].push(cv);
                if best[slot].offer(g, cv) {
                    // A valid LOO fit does not guarantee a valid full fit
                    // in degenerate layouts; keep the error for reporting.
                    fits[slot] = Some(table.fit(ds, &models[i])?);
                }
            }
        }

        for (slot, &i) in members.iter().enumerate() {
            let index = best[slot]
                .index
                .ok_or(SvmmaError::NoValidBandwidth(grid.len()))?;
            let (fitted, hat) = fits[slot].take().expect("fit recorded with best index");
            let model = models[i].clone().with_bandwidth(grid[index]);
            let selection = BandwidthSelection {
                bandwidth: grid[index],
                grid: grid.clone(),
                cv_values: std::mem::take(&mut cvs[slot]),
            };
            out[i] = Some((selection, assemble(ds, model, fitted, hat, None)));
        }
    }
    Ok(out
        .into_iter()
        .map(|o| o.expect("every model grouped"))
        .collect())
}

/// Fits every candidate at its already-set bandwidth, sharing moment tables
/// between candidates with equal smoothing settings.
pub fn fit_all(
    ds: &Arc<SpatialDataset>,
    models: &[CandidateModel],
) -> Result<Vec<FittedCandidate>> {
    let mut out: Vec<Option<FittedCandidate>> = vec![None; models.len()];
    let mut done = vec![false; models.len()];
    for i in 0..models.len() {
        if done[i] {
            continue;
        }
        let h = models[i].require_bandwidth()?;
        models[i].validate_for(ds.p())?;
        let members: Vec<usize> = (i..models.len())
            .filter(|&j| {
                !done[j]
                    && models[j].bandwidth == Some(h)
                    && models[j].kernel == models[i].kernel
                    && models[j].distance == models[i].distance
            })
            .collect();
        let mut universe: Vec<usize> = members
            .iter()
            .flat_map(|&j| models[j].columns.iter().cloned())
            .collect();
        universe.sort_unstable();
        universe.dedup();
        for &j in &members {
            models[j].validate_for(ds.p())?;
        }
        let table =
            MomentTable::build(ds, &universe, models[i].kernel, models[i].distance, h, None)?;
        for &j in &members {
            let (fitted, hat) = table.fit(ds, &models[j])?;
            out[j] = Some(assemble(ds, models[j].clone(), fitted, hat, None));
            done[j] = true;
        }
    }
    Ok(out.into_iter().map(|o| o.expect("all fitted")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::INTERCEPT_NAME;
    use crate::kernels::KernelKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(n: usize, p: usize, seed: u64) -> Arc<SpatialDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locations: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let x = DMatrix::from_fn(n, p, |_, j| {
            if j == 0 {
                1.0
            } else {
                rng.random::<f64>() * 2.0 - 1.0
            }
        });
        let y = DVector::from_fn(n, |i, _| {
            let s = locations[i];
            s[0] + (3.0 * s[1]).sin() * x[(i, 1.min(p - 1))] + 0.3 * (rng.random::<f64>() - 0.5)
        });
        let mut names = vec![INTERCEPT_NAME.to_string()];
        names.extend((1..p).map(|j| format!("x{j}")));
        Arc::new(SpatialDataset::new(locations, x, y, names, "y").unwrap())
    }

    fn model(cols: Vec<usize>, kind: KernelKind, h: f64) -> CandidateModel {
        CandidateModel::new(cols, kind, DistanceSpec::EUCLIDEAN)
            .unwrap()
            .with_bandwidth(h)
    }

    fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let xtx = x.transpose() * x;
        let xty = x.transpose() * y;
        xtx.cholesky().unwrap().solve(&xty)
    }

    #[test]
    fn intercept_only_is_kernel_weighted_mean() {
        let ds = random_dataset(30, 2, 1);
        let cm = model(vec![0], KernelKind::Gaussian, 0.3);
        let s = [0.4, 0.6];
        let w = crate::kernels::weight_diagonal(
            ds.locations(),
            s,
            KernelKind::Gaussian,
            0.3,
            DistanceSpec::EUCLIDEAN,
        )
        .unwrap();
        let expect = w
            .iter()
            .zip(ds.response().iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / w.iter().sum::<f64>();
        let beta = fit_local(&ds, &cm, s).unwrap();
        assert!((beta[0] - expect).abs() < 1e-12 * expect.abs().max(1.0));

        let row = hat_row(&ds, &cm, 3).unwrap();
        let w = crate::kernels::weight_diagonal(
            ds.locations(),
            ds.locations()[3],
            KernelKind::Gaussian,
            0.3,
            DistanceSpec::EUCLIDEAN,
        )
        .unwrap();
        let total: f64 = w.iter().sum();
        for (r, wi) in row.iter().zip(&w) {
            assert!((r - wi / total).abs() < 1e-14);
        }
    }

    #[test]
    fn huge_bandwidth_matches_ols() {
        let ds = random_dataset(40, 3, 2);
        let cm = model(vec![0, 1, 2], KernelKind::Gaussian, 1e6 * 1.5);
        let b_ols = ols(ds.covariates(), ds.response());
        let beta = fit_local(&ds, &cm, [0.2, 0.9]).unwrap();
        for (a, b) in beta.iter().zip(b_ols.iter()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn reproduces_model_class_exactly() {
        let ds = random_dataset(25, 3, 3);
        let c = DVector::from_vec(vec![0.5, -2.0, 1.25]);
        let y = ds.covariates() * &c;
        let ds = Arc::new(ds.with_response(y).unwrap());
        let cm = model(vec![0, 1, 2], KernelKind::Bisquare, 0.8);
        for s in [[0.1, 0.1], [0.5, 0.5], [0.9, 0.3]] {
            let beta = fit_local(&ds, &cm, s).unwrap();
            for (a, b) in beta.iter().zip(c.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_when_support_too_small() {
        let ds = random_dataset(10, 3, 4);
        let cm = model(vec![0, 1, 2], KernelKind::Bisquare, 1e-4);
        let err = fit_local(&ds, &cm, ds.locations()[0]).unwrap_err();
        match err {
            SvmmaError::SingularLocalFit { support, dim, .. } => {
                assert_eq!(support, 1);
                assert_eq!(dim, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(fit_candidate(&ds, &cm, false).is_err());
    }

    #[test]
    fn unset_bandwidth_is_an_error() {
        let ds = random_dataset(10, 2, 5);
        let cm =
            CandidateModel::new(vec![0], KernelKind::Gaussian, DistanceSpec::EUCLIDEAN).unwrap();
        assert!(fit_local(&ds, &cm, [0.0, 0.0]).is_err());
        assert!(
            CandidateModel::new(vec![0, 0], KernelKind::Gaussian, DistanceSpec::EUCLIDEAN).is_err()
        );
        assert!(
            CandidateModel::new(vec![], KernelKind::Gaussian, DistanceSpec::EUCLIDEAN).is_err()
        );
    }

    #[test]
    fn fitted_candidate_consistency() {
        let ds = random_dataset(30, 3, 6);
        let cm = model(vec![0, 2], KernelKind::Gaussian, 0.25);
        let fc = fit_candidate(&ds, &cm, true).unwrap();
        let p = fc.hat_matrix().unwrap();
        let py = p * ds.response();
        for (a, b) in py.iter().zip(fc.fitted().iter()) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
        let brute: f64 = (0..ds.n()).map(|i| hat_row(&ds, &cm, i).unwrap()[i]).sum();
        assert!((brute - fc.hat_trace()).abs() < 1e-10);
        assert!((fc.hat_diagonal().sum() - fc.hat_trace()).abs() < 1e-12);
        for i in 0..ds.n() {
            assert!((p.row(i).sum() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn tiny_bisquare_bandwidth_gives_identity_hat() {
        let ds = random_dataset(12, 2, 7);
        let cm = model(vec![0], KernelKind::Bisquare, 1e-6);
        let fc = fit_candidate(&ds, &cm, true).unwrap();
        assert!((fc.hat_trace() - 12.0).abs() < 1e-12);
        let p = fc.hat_matrix().unwrap();
        assert!((p - DMatrix::<f64>::identity(12, 12)).abs().max() < 1e-15);
    }

    #[test]
    fn kernel_scale_invariance() {
        let ds = random_dataset(20, 3, 8);
        for kind in [KernelKind::Gaussian, KernelKind::Bisquare] {
            let base = model(vec![0, 1, 2], kind, 0.9);
            for c in [0.5, 2.0] {
                let mut scaled = base.clone();
                scaled.kernel = scaled.kernel.scaled(c);
                for i in [0, 7, 19] {
                    let a = hat_row(&ds, &base, i).unwrap();
                    let b = hat_row(&ds, &scaled, i).unwrap();
                    assert!((a - b).abs().max() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_in_response() {
        let ds = random_dataset(20, 2, 9);
        let cm = model(vec![0, 1], KernelKind::Gaussian, 0.4);
        let y2 = DVector::from_fn(20, |i, _| (i as f64).cos());
        let ds2 = Arc::new(ds.with_response(y2.clone()).unwrap());
        let ds12 = Arc::new(ds.with_response(ds.response() + &y2).unwrap());
        let f1 = fit_candidate(&ds, &cm, false).unwrap();
        let f2 = fit_candidate(&ds2, &cm, false).unwrap();
        let f12 = fit_candidate(&ds12, &cm, false).unwrap();
        assert!((f1.fitted() + f2.fitted() - f12.fitted()).abs().max() < 1e-12);
    }

    #[test]
    fn prediction_at_training_location_matches_fit() {
        let ds = random_dataset(25, 3, 10);
        let cm = model(vec![0, 1, 2], KernelKind::Gaussian, 0.5);
        let fc = fit_candidate(&ds, &cm, false).unwrap();
        let rows = [3usize, 11];
        let locs: Vec<[f64; 2]> = rows.iter().map(|&r| ds.locations()[r]).collect();
        let x = ds.covariates().select_rows(&rows);
        let pred = fc.predict_at(&locs, &x).unwrap();
        for (k, &r) in rows.iter().enumerate() {
            assert!((pred[k] - fc.fitted()[r]).abs() < 1e-12);
        }
        let empty = fc.predict_at(&[], &DMatrix::zeros(0, 3)).unwrap();
        assert_eq!(empty.len(), 0);
    }

    #[test]
    fn huge_bandwidth_prediction_matches_ols() {
        let ds = random_dataset(30, 2, 11);
        let cm = model(vec![0, 1], KernelKind::Gaussian, 1e7);
        let fc = fit_candidate(&ds, &cm, false).unwrap();
        let b = ols(ds.covariates(), ds.response());
        let x_new = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 1.0, -0.7]);
        let pred = fc.predict_at(&[[0.1, 0.2], [5.0, 5.0]], &x_new).unwrap();
        let expect = &x_new * &b;
        assert!((pred - expect).abs().max() < 1e-6);
    }

    #[test]
    fn loo_ignores_own_response() {
        let ds = random_dataset(20, 2, 12);
        let cm = model(vec![0, 1], KernelKind::Gaussian, 0.3);
        let table =
            MomentTable::build(&ds, &cm.columns, cm.kernel, cm.distance, 0.3, None).unwrap();
        let base = table
            .loo_predictions(&ds, &cm, LoocvMethod::Refit)
            .unwrap()
            .unwrap();
        let mut y = ds.response().clone();
        y[5] += 100.0;
        let ds2 = ds.with_response(y).unwrap();
        let table2 =
            MomentTable::build(&ds2, &cm.columns, cm.kernel, cm.distance, 0.3, None).unwrap();
        let moved = table2
            .loo_predictions(&ds2, &cm, LoocvMethod::Refit)
            .unwrap()
            .unwrap();
        assert!((base[5] - moved[5]).abs() < 1e-9);
    }

    #[test]
    fn loo_matches_brute_force_refit() {
        let ds = random_dataset(15, 3, 13);
        let cm = model(vec![0, 1, 2], KernelKind::Gaussian, 0.6);
        let table =
            MomentTable::build(&ds, &cm.columns, cm.kernel, cm.distance, 0.6, None).unwrap();
        let loo = table
            .loo_predictions(&ds, &cm, LoocvMethod::Refit)
            .unwrap()
            .unwrap();
        let lev = table
            .loo_predictions(&ds, &cm, LoocvMethod::Leverage)
            .unwrap()
            .unwrap();
        for i in 0..ds.n() {
            let keep: Vec<usize> = (0..ds.n()).filter(|&j| j != i).collect();
            let sub = ds.select_rows(&keep).unwrap();
            let beta = fit_local(&sub, &cm, ds.locations()[i]).unwrap();
            let pred: f64 = (0..3).map(|c| ds.covariates()[(i, c)] * beta[c]).sum();
            assert!((pred - loo[i]).abs() < 1e-9, "row {i}");
            assert!((pred - lev[i]).abs() < 1e-9, "row {i}");
        }
    }

    #[test]
    fn cv_of_constant_response_picks_smallest_valid() {
        let ds = random_dataset(16, 2, 14);
        let ds = ds.with_response(DVector::from_element(16, 2.5)).unwrap();
        let cm =
            CandidateModel::new(vec![0], KernelKind::Bisquare, DistanceSpec::EUCLIDEAN).unwrap();
        // The smallest grid value isolates points, so its LOO fits are singular.
        let grid = [1e-6, 0.5, 0.8, 1.6];
        let sel = loocv_bandwidth(&ds, &cm, &grid).unwrap();
        assert!(sel.cv_values[0].is_infinite());
        let first_valid = sel.cv_values.iter().position(|v| v.is_finite()).unwrap();
        assert_eq!(sel.bandwidth, sel.grid[first_valid]);
        assert!(sel.cv_values[first_valid..].iter().all(|&v| v < 1e-20));
    }

    #[test]
    fn no_valid_bandwidth() {
        let ds = random_dataset(8, 2, 15);
        let cm =
            CandidateModel::new(vec![0, 1], KernelKind::Bisquare, DistanceSpec::EUCLIDEAN).unwrap();
        assert!(matches!(
            loocv_bandwidth(&ds, &cm, &[1e-6, 1e-5]),
            Err(SvmmaError::NoValidBandwidth(2))
        ));
        let sel = loocv_bandwidth(&ds, &cm, &[1e-6, 10.0]).unwrap();
        assert_eq!(sel.bandwidth, 10.0);
    }

    #[test]
    fn batched_selection_matches_individual() {
        let ds = random_dataset(30, 4, 16);
        let models: Vec<CandidateModel> = [vec![0], vec![0, 1], vec![0, 2, 3], vec![1, 3]]
            .into_iter()
            .map(|c| CandidateModel::new(c, KernelKind::Gaussian, DistanceSpec::EUCLIDEAN).unwrap())
            .collect();
        let grid = BandwidthGrid::default()
            .resolve(ds.locations(), DistanceSpec::EUCLIDEAN)
            .unwrap();
        let batched = select_and_fit(&ds, &models, &grid, LoocvMethod::Refit).unwrap();
        for (m, (sel, fc)) in models.iter().zip(&batched) {
            let single = loocv_bandwidth(&ds, m, &grid).unwrap();
            assert_eq!(&single, sel);
            let refit =
                fit_candidate(&ds, &m.clone().with_bandwidth(sel.bandwidth), false).unwrap();
            assert_eq!(refit.fitted(), fc.fitted());
            assert_eq!(refit.hat_trace(), fc.hat_trace());
        }
        let again = fit_all(
            &ds,
            &batched
                .iter()
                .map(|(_, f)| f.model().clone())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        for (a, (_, b)) in again.iter().zip(&batched) {
            assert_eq!(a.fitted(), b.fitted());
        }
    }

    #[test]
    fn sigma2_estimates() {
        let ds = random_dataset(30, 3, 17);
        let cm = model(vec![0, 1, 2], KernelKind::Gaussian, 0.4);
        let fc = fit_candidate(&ds, &cm, false).unwrap();
        let naive = sigma2_naive(&fc, ds.response()).unwrap();
        let adj = sigma2_largest(&ds, &cm).unwrap();
        let n = ds.n() as f64;
        assert!((naive - (n - fc.hat_trace()) / n * adj).abs() < 1e-12);

        // Huge bandwidth: OLS variance with n - p degrees of freedom.
        let big = model(vec![0, 1, 2], KernelKind::Gaussian, 1e7);
        let b = ols(ds.covariates(), ds.response());
        let rss = (ds.response() - ds.covariates() * b).norm_squared();
        let s2 = sigma2_largest(&ds, &big).unwrap();
        assert!((s2 - rss / (n - 3.0)).abs() < 1e-6 * s2);
    }

    #[test]
    fn sigma2_naive_arithmetic() {
        let locations = vec![[0.0, 0.0], [1.0, 0.0]];
        let ds = Arc::new(
            SpatialDataset::new(
                locations,
                DMatrix::from_element(2, 1, 1.0),
                DVector::from_vec(vec![1.0, -1.0]),
                vec![INTERCEPT_NAME.into()],
                "y",
            )
            .unwrap(),
        );
        // Huge bandwidth: fitted mean 0, residuals (1, -1).
        let fc = fit_candidate(&ds, &model(vec![0], KernelKind::Gaussian, 1e8), false).unwrap();
        assert!((sigma2_naive(&fc, ds.response()).unwrap() - 1.0).abs() < 1e-12);
        let zero = fit_candidate(&ds, &model(vec![0], KernelKind::Bisquare, 0.5), false).unwrap();
        assert_eq!(sigma2_naive(&zero, ds.response()).unwrap(), 0.0);
        assert!(matches!(
            zero.sigma2_adjusted(),
            Err(SvmmaError::DegenerateDof { .. })
        ));
    }

    #[test]
    fn grid_parsing_and_resolution() {
        let g = BandwidthGrid::parse("rel:3:0.1:1").unwrap();
        let locs = vec![[0.0, 0.0], [3.0, 4.0]];
        let values = g.resolve(&locs, DistanceSpec::EUCLIDEAN).unwrap();
        assert_eq!(values.len(), 3);
        assert!((values[0] - 0.5).abs() < 1e-12);
        assert!((values[2] - 5.0).abs() < 1e-12);
        let g = BandwidthGrid::parse("list:0.3,0.1").unwrap();
        assert_eq!(
            g.resolve(&locs, DistanceSpec::EUCLIDEAN).unwrap(),
            vec![0.1, 0.3]
        );
        assert!(BandwidthGrid::parse("nope").is_err());
        assert!(BandwidthGrid::parse("list:0,1")
            .unwrap()
            .resolve(&locs, DistanceSpec::EUCLIDEAN)
            .is_err());
    }
}
