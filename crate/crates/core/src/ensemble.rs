//! Fitting a whole candidate set on one training sample and turning it into
//! weights for each averaging or selection method.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::averaging::{
    feasible_problem, info_criteria, select_min, smoothed_weights, solve_weights, InfoCriteria,
    MallowsProblem, SmoothedKind, VarianceMode, WeightVector,
};
use crate::data::SpatialDataset;
use crate::error::{Result, SvmmaError};
use crate::gwr::{
    fit_all, select_and_fit, BandwidthGrid, BandwidthSelection, CandidateModel, FittedCandidate,
    LoocvMethod,
};
use crate::linear::{jma_weights, linear_ic_select, mma_weights, ols_fit, LinearFit};

/// Weighting or selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mallows weights with the true error variance.
    SvmmaKnownSigma,
    /// Mallows weights with the plug-in variance of the largest candidate.
    SvmmaPlugin,
    Saic,
    Sbic,
    Aic,
    Bic,
    Aicc,
    Mma,
    Jma,
    LinearAic,
    LinearBic,
    /// Loss-minimizing weights over the local candidates (needs the truth).
    OracleSvcma,
    /// Loss-minimizing weights over the linear candidates (needs the truth).
    OracleLinear,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::SvmmaKnownSigma,
        Method::SvmmaPlugin,
        Method::Saic,
        Method::Sbic,
        Method::Aic,
        Method::Bic,
        Method::Aicc,
        Method::Mma,
        Method::Jma,
        Method::LinearAic,
        Method::LinearBic,
        Method::OracleSvcma,
        Method::OracleLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SvmmaKnownSigma => "svmma_known_sigma",
            Method::SvmmaPlugin => "svmma_plugin",
            Method::Saic => "saic",
            Method::Sbic => "sbic",
            Method::Aic => "aic",
            Method::Bic => "bic",
            Method::Aicc => "aicc",
            Method::Mma => "mma",
            Method::Jma => "jma",
            Method::LinearAic => "linear_aic",
            Method::LinearBic => "linear_bic",
            Method::OracleSvcma => "oracle_svcma",
            Method::OracleLinear => "oracle_linear",
        }
    }

    /// Uses the linear (global-coefficient) candidates.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            Method::Mma
                | Method::Jma
                | Method::LinearAic
                | Method::LinearBic
                | Method::OracleLinear
        )
    }

    pub fn is_oracle(self) -> bool {
        matches!(self, Method::OracleSvcma | Method::OracleLinear)
    }

    /// Feasible on real data (no true mean or variance needed).
    pub fn is_feasible(self) -> bool {
        !self.is_oracle() && self != Method::SvmmaKnownSigma
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SvmmaError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "svmma" {
            return Ok(Method::SvmmaPlugin);
        }
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| SvmmaError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Method = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(SvmmaError::InvalidArgument("empty method list".into()));
    }
    Ok(out)
}

/// Local candidates fitted at their bandwidths, with per-candidate criteria.
#[derive(Debug, Clone)]
pub struct SvcmEnsemble {
    fits: Vec<FittedCandidate>,
    selections: Vec<Option<BandwidthSelection>>,
    criteria: Vec<InfoCriteria>,
}

impl SvcmEnsemble {
    /// Candidates with a bandwidth are fitted at it; the rest get a
    /// leave-one-out CV bandwidth from `grid` first.
    pub fn fit(
        ds: &Arc<SpatialDataset>,
        models: &[CandidateModel],
        grid: &BandwidthGrid,
        loocv: LoocvMethod,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(SvmmaError::InvalidArgument("empty candidate set".into()));
        }
        let unset: Vec<usize> = (0..models.len())
            .filter(|&i| models[i].bandwidth.is_none())
            .collect();
        let set: Vec<usize> = (0..models.len())
            .filter(|&i| models[i].bandwidth.is_some())
            .collect();
        let mut fits: Vec<Option<FittedCandidate>> = vec![None; models.len()];
        let mut selections: Vec<Option<BandwidthSelection>> = vec![None; models.len()];
        if !unset.is_empty() {
            let distance = models[unset[0]].distance;
            let values = grid.resolve(ds.locations(), distance)?;
            let chosen: Vec<CandidateModel> = unset.iter().map(|&i| models[i].clone()).collect();
            // A relative grid is resolved per distance so mixed metrics stay correct.
            let same_metric = chosen.iter().all(|m| m.distance == distance);
            let results = if same_metric {
                select_and_fit(ds, &chosen, &values, loocv)?
            } else {
                let mut out = Vec::with_capacity(chosen.len());
                for m in &chosen {
                    let v = grid.resolve(ds.locations(), m.distance)?;
                    out.extend(select_and_fit(ds, std::slice::from_ref(m), &v, loocv)?);
                }
                out
            };
            for (&i, (sel, fit)) in unset.iter().zip(results) {
                fits[i] = Some(fit);
                selections[i] = Some(sel);
            }
        }
        if !set.is_empty() {
            let chosen: Vec<CandidateModel> = set.iter().map(|&i| models[i].clone()).collect();
            for (&i, fit) in set.iter().zip(fit_all(ds, &chosen)?) {
                fits[i] = Some(fit);
            }
        }
        let fits: Vec<FittedCandidate> = fits
            .into_iter()
            .map(|f| f.expect("every candidate fitted"))
            .collect();
        let criteria = fits.iter().map(info_criteria).collect();
        Ok(Self {
            fits,
            selections,
            criteria,
        })
    }

    pub fn fits(&self) -> &[FittedCandidate] {
        &self.fits
    }

    pub fn selections(&self) -> &[Option<BandwidthSelection>] {
        &self.selections
    }

    pub fn criteria(&self) -> &[InfoCriteria] {
        &self.criteria
    }

    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.fits.iter().map(|f| f.bandwidth()).collect()
    }

    pub fn models(&self) -> Vec<CandidateModel> {
        self.fits.iter().map(|f| f.model().clone()).collect()
    }

    /// `n x M` matrix of in-sample fitted values.
    pub fn fitted_matrix(&self) -> DMatrix<f64> {
        let n = self.fits[0].fitted().len();
        DMatrix::from_fn(n, self.fits.len(), |i, m| self.fits[m].fitted()[i])
    }

    pub fn problem(&self, mode: VarianceMode) -> Result<MallowsProblem> {
        feasible_problem(&self.fits, mode)
    }

    /// Weights for a local-candidate method. `known_sigma2` is required for
    /// [`Method::SvmmaKnownSigma`].
    pub fn weights(&self, method: Method, known_sigma2: Option<f64>) -> Result<WeightVector> {
        let m = self.fits.len();
        let pick = |scores: Vec<f64>| -> Result<WeightVector> {
            Ok(WeightVector::unit(m, select_min(&scores)?))
        };
        match method {
            Method::SvmmaPlugin => solve_weights(&self.problem(VarianceMode::PlugIn)?),
            Method::SvmmaKnownSigma => {
                let s2 = known_sigma2.ok_or_else(|| {
                    SvmmaError::InvalidArgument(
                        "svmma_known_sigma needs the true error variance".into(),
                    )
                })?;
                solve_weights(&self.problem(VarianceMode::Known(s2))?)
            }
            Method::Saic => smoothed_weights(&SmoothedKind::Saic.scores(&self.criteria)),
            Method::Sbic => smoothed_weights(&SmoothedKind::Sbic.scores(&self.criteria)),
            Method::Aic => pick(self.criteria.iter().map(|c| c.aic).collect()),
            Method::Bic => pick(self.criteria.iter().map(|c| c.bic).collect()),
            Method::Aicc => pick(self.criteria.iter().map(|c| c.aicc).collect()),
            other => Err(SvmmaError::InvalidArgument(format!(
                "{other} is not a feasible local-candidate method"
            ))),
        }
    }

    /// `k x M` candidate predictions at new locations.
    pub fn predictions(
        &self,
        locations: &[[f64; 2]],
        covariates: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let cols = self
            .fits
            .iter()
            .map(|f| f.predict_at(locations, covariates))
            .collect::<Result<Vec<_>>>()?;
        Ok(if cols.is_empty() || locations.is_empty() {
            DMatrix::zeros(locations.len(), self.fits.len())
        } else {
            DMatrix::from_columns(&cols)
        })
    }
}

/// Global least-squares fits on the same column subsets.
#[derive(Debug, Clone)]
pub struct LinearEnsemble {
    fits: Vec<LinearFit>,
    y: DVector<f64>,
}

impl LinearEnsemble {
    pub fn fit(ds: &SpatialDataset, models: &[CandidateModel]) -> Result<Self> {
        if models.is_empty() {
            return Err(SvmmaError::InvalidArgument("empty candidate set".into()));
        }
        let fits = models
            .iter()
            .map(|m| ols_fit(ds, &m.columns))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fits,
            y: ds.response().clone(),
        })
    }

    pub fn fits(&self) -> &[LinearFit] {
        &self.fits
    }

    pub fn fitted_matrix(&self) -> DMatrix<f64> {
        let n = self.y.len();
        DMatrix::from_fn(n, self.fits.len(), |i, m| self.fits[m].fitted[i])
    }

    pub fn weights(&self, method: Method) -> Result<WeightVector> {
        let m = self.fits.len();
        match method {
            Method::Mma => mma_weights(&self.fits, &self.y),
            Method::Jma => jma_weights(&self.fits, &self.y),
            Method::LinearAic => Ok(WeightVector::unit(
                m,
                linear_ic_select(&self.fits, &self.y)?.aic,
            )),
            Method::LinearBic => Ok(WeightVector::unit(
                m,
                linear_ic_select(&self.fits, &self.y)?.bic,
            )),
            other => Err(SvmmaError::InvalidArgument(format!(
                "{other} is not a feasible linear-candidate method"
            ))),
        }
    }

    pub fn predictions(&self, covariates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let cols = self
            .fits
            .iter()
            .map(|f| f.predict(covariates))
            .collect::<Result<Vec<_>>>()?;
        Ok(if covariates.nrows() == 0 {
            DMatrix::zeros(0, self.fits.len())
        } else {
            DMatrix::from_columns(&cols)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert_eq!("svmma".parse::<Method>().unwrap(), Method::SvmmaPlugin);
        assert!("nope".parse::<Method>().is_err());
        assert_eq!(
            parse_methods("saic, sbic,saic").unwrap(),
            vec![Method::Saic, Method::Sbic]
        );
    }
}
