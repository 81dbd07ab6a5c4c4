//! Synthetic designs with known conditional means, noise calibration to a
//! target R², oracle weights and loss metrics.

mod runner;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::averaging::{simplex_qp, WeightVector, DEFAULT_TOLERANCE};
use crate::candidates::{all_subsets, nested_count_rule, nested_set, CandidateSet};
use crate::data::{unit_square_grid, SpatialDataset, INTERCEPT_NAME};
use crate::ensemble::Method;
use crate::error::{Result, SvmmaError};
use crate::gwr::{BandwidthGrid, LoocvMethod};
use crate::kernels::{DistanceSpec, KernelKind};

pub use runner::{
    run_replication, run_replications, MethodSummary, ReplicationFailure, ReplicationRecord,
    RiskReport,
};

/// Extra covariates beyond the candidate count in Designs 1 and 2.
pub const EXTRA_COVARIATES: usize = 200;

/// Design 3 coefficients.
pub const DESIGN3_THETA: [f64; 6] = [1.0, 1.2, -1.0, 0.9, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Design {
    /// Linear model with slowly decaying coefficients.
    One,
    /// Design 1 coefficients multiplied by a quadratic surface in space.
    Two,
    /// Six equicorrelated covariates, four active, all-subsets candidates.
    Three,
}

impl TryFrom<u8> for Design {
    type Error = SvmmaError;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Design::One),
            2 => Ok(Design::Two),
            3 => Ok(Design::Three),
            other => Err(SvmmaError::InvalidArgument(format!(
                "design must be 1, 2 or 3, got {other}"
            ))),
        }
    }
}

impl From<Design> for u8 {
    fn from(d: Design) -> u8 {
        match d {
            Design::One => 1,
            Design::Two => 2,
            Design::Three => 3,
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorCase {
    /// Standard normal.
    I,
    /// Student t with 5 degrees of freedom.
    Ii,
    /// `sqrt(0.2 + 0.5 x_2^2) u` with standard normal `u`.
    Iii,
}

impl ErrorCase {
    /// Population variance of the unscaled error.
    pub fn variance(self) -> f64 {
        match self {
            ErrorCase::I => 1.0,
            ErrorCase::Ii => 5.0 / 3.0,
            ErrorCase::Iii => 0.7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCase::I => "i",
            ErrorCase::Ii => "ii",
            ErrorCase::Iii => "iii",
        }
    }
}

impl FromStr for ErrorCase {
    type Err = SvmmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i" | "1" => Ok(ErrorCase::I),
            "ii" | "2" => Ok(ErrorCase::Ii),
            "iii" | "3" => Ok(ErrorCase::Iii),
            other => Err(SvmmaError::InvalidArgument(format!(
                "unknown error case `{other}`"
            ))),
        }
    }
}

impl fmt::Display for ErrorCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where observations sit in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationLayout {
    /// `(j / k, l / k)` grid; `n` must be a perfect square.
    #[default]
    Grid,
    /// Uniform draws, made before the covariates from the replication seed.
    Uniform,
}

fn default_kernel() -> KernelKind {
    KernelKind::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub design: Design,
    pub n: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    pub r2: f64,
    #[serde(default = "case_i")]
    pub error_case: ErrorCase,
    #[serde(default)]
    pub seed: u64,
    pub replications: usize,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default)]
    pub distance: DistanceSpec,
    #[serde(default)]
    pub grid: BandwidthGrid,
    #[serde(default)]
    pub loocv: LoocvMethod,
    #[serde(default)]
    pub layout: LocationLayout,
    /// Overrides the nested candidate count for Designs 1 and 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn case_i() -> ErrorCase {
    ErrorCase::I
}

impl DesignConfig {
    pub fn new(design: Design, n: usize, alpha: f64, r2: f64, replications: usize) -> Self {
        Self {
            design,
            n,
            alpha,
            r2,
            error_case: ErrorCase::I,
            seed: 0,
            replications,
            kernel: default_kernel(),
            distance: DistanceSpec::EUCLIDEAN,
            grid: BandwidthGrid::default(),
            loocv: LoocvMethod::Refit,
            layout: LocationLayout::Grid,
            candidates: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| {
            Err(SvmmaError::InvalidArgument(format!("`{field}`: {why}")))
        };
        if self.n < 2 {
            return bad("n", format!("need at least 2 observations, got {}", self.n));
        }
        if self.layout == LocationLayout::Grid && crate::data::exact_sqrt(self.n).is_none() {
            return bad(
                "n",
                format!("{} is not a perfect square (grid layout)", self.n),
            );
        }
        if !(self.r2 > 0.0 && self.r2 < 1.0) {
            return bad("r2", format!("{} is outside (0, 1)", self.r2));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", format!("{} must be positive", self.alpha));
        }
        if self.replications == 0 {
            return bad("replications", "must be at least 1".into());
        }
        if let Some(m) = self.candidates {
            if m == 0 {
                return bad("candidates", "must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Number of candidate models.
    pub fn candidate_count(&self) -> usize {
        match self.design {
            Design::Three => 63,
            _ => self.candidates.unwrap_or_else(|| nested_count_rule(self.n)),
        }
    }

    /// Number of generated covariates.
    pub fn covariate_count(&self) -> usize {
        match self.design {
            Design::Three => 6,
            _ => self.candidate_count() + EXTRA_COVARIATES,
        }
    }

    pub fn candidate_set(&self) -> Result<CandidateSet> {
        match self.design {
            Design::Three => {
                Ok(all_subsets(6, self.kernel, self.distance)?.with_quasi_correct(&[0, 1, 2, 3]))
            }
            _ => nested_set(
                self.covariate_count(),
                self.candidate_count(),
                self.kernel,
                self.distance,
            ),
        }
    }

    /// Methods meaningful for the design, in report order.
    pub fn default_methods(&self) -> Vec<Method> {
        Method::ALL.to_vec()
    }
}

/// A generated dataset with its true conditional mean.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub dataset: SpatialDataset,
    pub mu: DVector<f64>,
    pub c: f64,
    pub sigma2_true: f64,
    /// Columns with nonzero coefficients, when the design has exact zeros.
    pub true_support: Option<Vec<usize>>,
}

/// `theta_1 = 10^(-alpha - 1/2)`, `theta_j = j^(-alpha - 1/2)` for `j >= 2`.
pub fn theta_sequence(alpha: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|j| {
            if j == 1 {
                10f64.powf(-alpha - 0.5)
            } else {
                (j as f64).powf(-alpha - 0.5)
            }
        })
        .collect()
}

/// `1 - (1 - 2 s_1)^2 - (1 - 2 s_2)^2`.
pub fn spatial_surface(s: [f64; 2]) -> f64 {
    let a = 1.0 - 2.0 * s[0];
    let b = 1.0 - 2.0 * s[1];
    1.0 - a * a - b * b
}

/// Unscaled errors and their population variance. Case iii needs `x2`.
pub fn draw_errors<R: Rng + ?Sized>(
    case: ErrorCase,
    n: usize,
    x2: Option<&[f64]>,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let e = match case {
        ErrorCase::I => DVector::from_fn(n, |_, _| StandardNormal.sample(rng)),
        ErrorCase::Ii => {
            let t = StudentT::new(5.0).expect("valid degrees of freedom");
            DVector::from_fn(n, |_, _| t.sample(rng))
        }
        ErrorCase::Iii => {
            let x2 = x2.ok_or_else(|| {
                SvmmaError::InvalidArgument("case iii needs the x2 column".into())
            })?;
            if x2.len() != n {
                return Err(SvmmaError::DimensionMismatch(format!(
                    "x2 has {} rows, n = {n}",
                    x2.len()
                )));
            }
            DVector::from_fn(n, |i, _| {
                let u: f64 = StandardNormal.sample(rng);
                (0.2 + 0.5 * x2[i] * x2[i]).sqrt() * u
            })
        }
    };
    Ok((e, case.variance()))
}

fn sample_variance(v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    let mean = v.mean();
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Noise scale that gives `var(mu) / (var(mu) + c^2 var_eps) = r2` with the
/// sample variance of `mu`.
pub fn calibrate_c(mu: &DVector<f64>, var_epsilon: f64, r2: f64) -> Result<f64> {
    if !(r2 > 0.0 && r2 < 1.0) {
        return Err(SvmmaError::InvalidArgument(format!(
            "r2 = {r2} outside (0, 1)"
        )));
    }
    if !(var_epsilon > 0.0) {
        return Err(SvmmaError::InvalidArgument(format!(
            "error variance {var_epsilon} must be positive"
        )));
    }
    if mu.len() < 2 {
        return Err(SvmmaError::InvalidArgument(
            "need at least two means".into(),
        ));
    }
    let v = sample_variance(mu);
    if !(v > 0.0) {
        return Err(SvmmaError::InvalidArgument(
            "conditional mean is constant".into(),
        ));
    }
    Ok((v * (1.0 - r2) / (r2 * var_epsilon)).sqrt())
}

fn design3_factor() -> Matrix6<f64> {
    let sigma = Matrix6::from_fn(|i, j| if i == j { 1.0 } else { 0.5 });
    sigma
        .cholesky()
        .expect("equicorrelation matrix is positive definite")
        .l()
}

fn uniform_locations<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect()
}

/// Replication `replication` of the design, drawn from seed `seed + replication`.
pub fn generate(config: &DesignConfig, replication: usize) -> Result<GeneratedSample> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(replication as u64));
    let n = config.n;
    let locations = match config.layout {
        LocationLayout::Grid => unit_square_grid(n)?,
        LocationLayout::Uniform => uniform_locations(n, &mut rng),
    };
    let (x, names, mu, support) = match config.design {
        Design::One | Design::Two => {
            let j = config.covariate_count();
            let theta = theta_sequence(config.alpha, j);
            let mut x = DMatrix::zeros(n, j);
            for i in 0..n {
                x[(i, 0)] = 1.0;
                for c in 1..j {
                    x[(i, c)] = StandardNormal.sample(&mut rng);
                }
            }
            let linear = &x * DVector::from_vec(theta);
            let mu = if config.design == Design::Two {
                DVector::from_fn(n, |i, _| spatial_surface(locations[i]) * linear[i])
            } else {
                linear
            };
            let mut names = vec![INTERCEPT_NAME.to_string()];
            names.extend((2..=j).map(|c| format!("x{c}")));
            (x, names, mu, None)
        }
        Design::Three => {
            let l = design3_factor();
            let mut x = DMatrix::zeros(n, 6);
            for i in 0..n {
                let z = nalgebra::Vector6::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let row = l * z;
                for c in 0..6 {
                    x[(i, c)] = row[c];
                }
            }
            let theta = DVector::from_row_slice(&DESIGN3_THETA);
            let linear = &x * theta;
            let mu = DVector::from_fn(n, |i, _| spatial_surface(locations[i]) * linear[i]);
            let names = (1..=6).map(|c| format!("x{c}")).collect();
            (x, names, mu, Some(vec![0, 1, 2, 3]))
        }
    };
    let x2: Vec<f64> = x.column(1).iter().cloned().collect();
    let (eps, var_eps) = draw_errors(config.error_case, n, Some(&x2), &mut rng)?;
    let c = calibrate_c(&mu, var_eps, config.r2)?;
    let y = &mu + c * eps;
    let dataset = SpatialDataset::new(locations, x, y, names, "y")?;
    Ok(GeneratedSample {
        dataset,
        mu,
        c,
        sigma2_true: c * c * var_eps,
        true_support: support,
    })
}

/// Infeasible weights minimizing `||F w - mu||^2`.
pub fn oracle_weights(f: &DMatrix<f64>, mu: &DVector<f64>) -> Result<WeightVector> {
    if f.nrows() != mu.len() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "F has {} rows, mu has {}",
            f.nrows(),
            mu.len()
        )));
    }
    let h = f.transpose() * f;
    let b = f.transpose() * mu;
    simplex_qp(&h, &b, DEFAULT_TOLERANCE)
}

/// Ratio of mean losses.
pub fn relative_risk(losses_method: &[f64], losses_oracle: &[f64]) -> Result<f64> {
    if losses_method.len() != losses_oracle.len() || losses_method.is_empty() {
        return Err(SvmmaError::DimensionMismatch(format!(
            "{} method losses, {} oracle losses",
            losses_method.len(),
            losses_oracle.len()
        )));
    }
    let denom: f64 = losses_oracle.iter().sum();
    if !(denom > 0.0) {
        return Err(SvmmaError::ZeroDenominator(
            "oracle losses are all zero".into(),
        ));
    }
    Ok(losses_method.iter().sum::<f64>() / denom)
}

/// `(n N)^-1 sum_j ||estimate_j - mu_j||^2`.
pub fn mse(estimates: &[DVector<f64>], mu: &[DVector<f64>]) -> Result<f64> {
    if estimates.len() != mu.len() || estimates.is_empty() {
        return Err(SvmmaError::DimensionMismatch(
            "replication counts differ".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (e, m) in estimates.iter().zip(mu) {
        if e.len() != m.len() {
            return Err(SvmmaError::DimensionMismatch(
                "estimate length differs from mean".into(),
            ));
        }
        total += (e - m).norm_squared();
        count += m.len();
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        let t = theta_sequence(0.5, 3);
        assert!((t[0] - 0.1).abs() < 1e-15);
        assert!((t[1] - 0.5).abs() < 1e-15);
        let t = theta_sequence(1.0, 3);
        assert!((t[2] - 0.192_450_089_729_875_25).abs() < 1e-12);
    }

    #[test]
    fn surface_examples() {
        assert_eq!(spatial_surface([0.5, 0.5]), 1.0);
        assert_eq!(spatial_surface([0.0, 0.0]), -1.0);
        assert_eq!(spatial_surface([0.5, 0.0]), 0.0);
    }

    #[test]
    fn error_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (e, v) = draw_errors(ErrorCase::I, 100_000, None, &mut rng).unwrap();
        assert_eq!(v, 1.0);
        assert!((sample_variance(&e) - 1.0).abs() < 0.03);
        assert_eq!(ErrorCase::Ii.variance(), 5.0 / 3.0);
        assert!((ErrorCase::Iii.variance() - 0.7).abs() < 1e-15);
        assert!(draw_errors(ErrorCase::Iii, 5, None, &mut rng).is_err());
    }

    #[test]
    fn calibration() {
        let mu = DVector::from_vec(vec![-1.0, 1.0]);
        // Sample variance of (-1, 1) is 2.
        let c = calibrate_c(&mu, 2.0, 0.5).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
        let small = calibrate_c(&mu, 1.0, 0.999_999).unwrap();
        assert!(small < 2e-3);
        assert!(calibrate_c(&DVector::from_element(3, 1.0), 1.0, 0.5).is_err());
        for r2 in [0.1, 0.5, 0.9] {
            let mu = DVector::from_fn(50, |i, _| ((i * 7) % 11) as f64);
            let c = calibrate_c(&mu, 5.0 / 3.0, r2).unwrap();
            let v = sample_variance(&mu);
            assert!((v / (v + c * c * 5.0 / 3.0) - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_designs() {
        let cfg = DesignConfig::new(Design::Three, 100, 1.0, 0.7, 1);
        let s = generate(&cfg, 0).unwrap();
        assert_eq!(s.dataset.p(), 6);
        assert_eq!(s.true_support, Some(vec![0, 1, 2, 3]));
        assert!(!s.dataset.has_intercept());
        let again = generate(&cfg, 0).unwrap();
        assert_eq!(s.dataset, again.dataset);
        assert_ne!(generate(&cfg, 1).unwrap().dataset, s.dataset);

        let cfg = DesignConfig::new(Design::One, 100, 0.5, 0.5, 1);
        let s = generate(&cfg, 0).unwrap();
        assert_eq!(s.dataset.p(), 13 + 200);
        assert!(s.dataset.has_intercept());
        let theta = theta_sequence(0.5, 213);
        let mu0: f64 = (0..213)
            .map(|j| theta[j] * s.dataset.covariates()[(0, j)])
            .sum();
        assert!((mu0 - s.mu[0]).abs() < 1e-12);

        let mut cfg = DesignConfig::new(Design::Two, 225, 1.0, 0.7, 1);
        cfg.seed = 11;
        let s = generate(&cfg, 0).unwrap();
        let center = s
            .dataset
            .locations()
            .iter()
            .position(|l| l[0] == 8.0 / 15.0 && l[1] == 8.0 / 15.0)
            .unwrap();
        let theta = theta_sequence(1.0, 218);
        let lin: f64 = (0..218)
            .map(|j| theta[j] * s.dataset.covariates()[(center, j)])
            .sum();
        let f = spatial_surface(s.dataset.locations()[center]);
        assert!((s.mu[center] - f * lin).abs() < 1e-12);

        assert!(DesignConfig::new(Design::Two, 50, 1.0, 0.7, 1)
            .validate()
            .is_err());
        let mut uniform = DesignConfig::new(Design::Two, 50, 1.0, 0.7, 1);
        uniform.layout = LocationLayout::Uniform;
        assert_eq!(generate(&uniform, 0).unwrap().dataset.n(), 50);
    }

    #[test]
    fn design3_correlation() {
        let mut cfg = DesignConfig::new(Design::Three, 10_000, 1.0, 0.7, 1);
        cfg.seed = 5;
        let s = generate(&cfg, 0).unwrap();
        let x = s.dataset.covariates();
        let n = x.nrows() as f64;
        let means: Vec<f64> = (0..6).map(|j| x.column(j).mean()).collect();
        let cov = |a: usize, b: usize| {
            (0..x.nrows())
                .map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]))
                .sum::<f64>()
                / (n - 1.0)
        };
        for a in 0..6 {
            for b in 0..6 {
                let r = cov(a, b) / (cov(a, a) * cov(b, b)).sqrt();
                let target = if a == b { 1.0 } else { 0.5 };
                assert!((r - target).abs() < 0.05, "({a},{b}) = {r}");
            }
        }
    }

    #[test]
    fn oracle_and_metrics() {
        let mu = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let f = DMatrix::from_columns(&[DVector::from_vec(vec![0.0, 0.0, 0.0]), mu.clone()]);
        let w = oracle_weights(&f, &mu).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-12);
        let same = DMatrix::from_columns(&[mu.clone(), mu.clone(), mu.clone()]);
        let w = oracle_weights(&same, &(&mu * 0.5)).unwrap();
        for i in 0..3 {
            assert!((w[i] - 1.0 / 3.0).abs() < 1e-9);
        }

        assert_eq!(relative_risk(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(relative_risk(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert!(relative_risk(&[1.0, 1.0], &[2.0, 2.0]).unwrap() < 1.0);
        assert!(relative_risk(&[1.0], &[0.0]).is_err());

        let m = vec![DVector::zeros(4), DVector::zeros(4)];
        assert_eq!(mse(&m, &m).unwrap(), 0.0);
        let ones = vec![DVector::from_element(4, 1.0); 2];
        assert_eq!(mse(&ones, &m).unwrap(), 1.0);
        let two = vec![
            DVector::from_element(4, 1.0),
            DVector::from_element(4, 3f64.sqrt()),
        ];
        assert!((mse(&two, &m).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_line_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20;
        let f = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
        let mu = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let w = oracle_weights(&f, &mu).unwrap();
        let loss = |a: f64| (&f * DVector::from_vec(vec![a, 1.0 - a]) - &mu).norm_squared();
        let best = (0..=1000)
            .map(|k| loss(k as f64 / 1000.0))
            .fold(f64::INFINITY, f64::min);
        assert!(loss(w[0]) <= best + 1e-12);
    }
}
