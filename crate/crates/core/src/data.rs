//! Spatial observations: locations, covariates with an optional leading
//! intercept column, and a response.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvmmaError};

pub const INTERCEPT_NAME: &str = "intercept";

/// `n` observations at 2-D locations.
///
/// Immutable after construction. When the first covariate column is named
/// [`INTERCEPT_NAME`] it must equal 1 in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    locations: Vec<[f64; 2]>,
    covariates: DMatrix<f64>,
    response: DVector<f64>,
    column_names: Vec<String>,
    response_name: String,
}

impl SpatialDataset {
    pub fn new(
        locations: Vec<[f64; 2]>,
        covariates: DMatrix<f64>,
        response: DVector<f64>,
        column_names: Vec<String>,
        response_name: impl Into<String>,
    ) -> Result<Self> {
        let n = locations.len();
        if n == 0 {
            return Err(SvmmaError::InvalidDataset("no observations".into()));
        }
        if covariates.ncols() == 0 {
            return Err(SvmmaError::InvalidDataset("no covariate columns".into()));
        }
        if covariates.nrows() != n || response.len() != n {
            return Err(SvmmaError::DimensionMismatch(format!(
                "{} locations, {} covariate rows, {} responses",
                n,
                covariates.nrows(),
                response.len()
            )));
        }
        if column_names.len() != covariates.ncols() {
            return Err(SvmmaError::DimensionMismatch(format!(
                "{} column names for {} covariate columns",
                column_names.len(),
                covariates.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(SvmmaError::DuplicateColumn(name.clone()));
            }
        }
        if locations.iter().flatten().any(|v| !v.is_finite())
            || covariates.iter().any(|v| !v.is_finite())
            || response.iter().any(|v| !v.is_finite())
        {
            return Err(SvmmaError::NonFiniteInput("dataset entries".into()));
        }
        if column_names[0] == INTERCEPT_NAME && covariates.column(0).iter().any(|&v| v != 1.0) {
            return Err(SvmmaError::InvalidDataset(
                "intercept column is not identically 1".into(),
            ));
        }
        Ok(Self {
            locations,
            covariates,
            response,
            column_names,
            response_name: response_name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn locations(&self) -> &[[f64; 2]] {
        &self.locations
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn has_intercept(&self) -> bool {
        self.column_names[0] == INTERCEPT_NAME
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Same locations and covariates with a different response.
    pub fn with_response(&self, response: DVector<f64>) -> Result<Self> {
        if response.len() != self.n() {
            return Err(SvmmaError::DimensionMismatch(format!(
                "response of length {} for {} rows",
                response.len(),
                self.n()
            )));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(SvmmaError::NonFiniteInput("response".into()));
        }
        let mut out = self.clone();
        out.response = response;
        Ok(out)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(SvmmaError::InvalidArgument(format!(
                "row {bad} out of range for n = {}",
                self.n()
            )));
        }
        let locations = rows.iter().map(|&r| self.locations[r]).collect();
        let covariates = self.covariates.select_rows(rows);
        let response = self.response.select_rows(rows);
        Self::new(
            locations,
            covariates,
            response,
            self.column_names.clone(),
            self.response_name.clone(),
        )
    }

    /// Writes the dataset as CSV with the location columns first, then the
    /// response and covariates. The intercept column is not written.
    pub fn write_csv(&self, path: impl AsRef<Path>, location_columns: [&str; 2]) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let start = usize::from(self.has_intercept());
        let mut header = vec![
            location_columns[0].to_string(),
            location_columns[1].to_string(),
            self.response_name.clone(),
        ];
        header.extend(self.column_names[start..].iter().cloned());
        writer.write_record(&header)?;
        for i in 0..self.n() {
            let mut record = vec![
                self.locations[i][0].to_string(),
                self.locations[i][1].to_string(),
                self.response[i].to_string(),
            ];
            record.extend((start..self.p()).map(|j| self.covariates[(i, j)].to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub location_columns: [String; 2],
    pub response_column: String,
    pub covariate_columns: Vec<String>,
    pub add_intercept: bool,
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SpatialDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(SvmmaError::DuplicateColumn(h.clone()));
        }
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SvmmaError::MissingColumn(name.to_string()))
    };
    let loc_idx = [
        find(&schema.location_columns[0])?,
        find(&schema.location_columns[1])?,
    ];
    let y_idx = find(&schema.response_column)?;
    let x_idx = schema
        .covariate_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let parse = |record: &csv::StringRecord, row: usize, col: usize| -> Result<f64> {
        let raw = record.get(col).unwrap_or("");
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(SvmmaError::ParseCell {
                row,
                column: headers[col].clone(),
                value: raw.to_string(),
            }),
        }
    };

    let mut locations = Vec::new();
    let mut response = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row numbers, header excluded.
        let row = r + 1;
        locations.push([
            parse(&record, row, loc_idx[0])?,
            parse(&record, row, loc_idx[1])?,
        ]);
        response.push(parse(&record, row, y_idx)?);
        let mut x = Vec::with_capacity(x_idx.len() + 1);
        if schema.add_intercept {
            x.push(1.0);
        }
        for &c in &x_idx {
            x.push(parse(&record, row, c)?);
        }
        rows.push(x);
    }
    let n = rows.len();
    let p = schema.covariate_columns.len() + usize::from(schema.add_intercept);
    let covariates = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let mut names = Vec::with_capacity(p);
    if schema.add_intercept {
        names.push(INTERCEPT_NAME.to_string());
    }
    names.extend(schema.covariate_columns.iter().cloned());
    SpatialDataset::new(
        locations,
        covariates,
        DVector::from_vec(response),
        names,
        schema.response_column.clone(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformAction {
    Identity,
    NaturalLog,
    SquareRoot,
    Standardize,
}

impl std::str::FromStr for TransformAction {
    type Err = SvmmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log" | "ln" | "natural_log" => Ok(Self::NaturalLog),
            "sqrt" | "square_root" => Ok(Self::SquareRoot),
            "standardize" | "std" => Ok(Self::Standardize),
            other => Err(SvmmaError::InvalidArgument(format!(
                "unknown transform `{other}`"
            ))),
        }
    }
}

/// Per-column transforms, keyed by covariate or response name. Columns not
/// listed are left unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub actions: BTreeMap<String, TransformAction>,
}

impl TransformSpec {
    pub fn with(mut self, column: impl Into<String>, action: TransformAction) -> Self {
        self.actions.insert(column.into(), action);
        self
    }

    /// Parses `name=action,name=action`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, action) = part.split_once('=').ok_or_else(|| {
                SvmmaError::InvalidArgument(format!("transform `{part}` is not name=action"))
            })?;
            out.actions
                .insert(name.trim().to_string(), action.trim().parse()?);
        }
        Ok(out)
    }
}

fn column_error(name: &str, reason: &str) -> SvmmaError {
    SvmmaError::InvalidTransform {
        column: name.to_string(),
        reason: reason.to_string(),
    }
}

/// Sample mean and (n-1)-denominator standard deviation.
fn standardization(name: &str, values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(column_error(
            name,
            "standardizing needs at least two values",
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(column_error(name, "standardizing a constant column"));
    }
    Ok((mean, sd))
}

fn transform_column(
    name: &str,
    values: &mut [f64],
    action: TransformAction,
    center: Option<(f64, f64)>,
) -> Result<()> {
    match action {
        TransformAction::Identity => {}
        TransformAction::NaturalLog => {
            if values.iter().any(|&v| v <= 0.0) {
                return Err(column_error(name, "natural log of a nonpositive value"));
            }
            values.iter_mut().for_each(|v| *v = v.ln());
        }
        TransformAction::SquareRoot => {
            if values.iter().any(|&v| v < 0.0) {
                return Err(column_error(name, "square root of a negative value"));
            }
            values.iter_mut().for_each(|v| *v = v.sqrt());
        }
        TransformAction::Standardize => {
            let (mean, sd) = center.expect("standardization constants are fitted");
            values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
    }
    Ok(())
}

/// A [`TransformSpec`] with standardization constants estimated from a
/// reference sample, so other samples can be mapped the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTransforms {
    pub spec: TransformSpec,
    /// `(mean, sd)` per standardized column.
    pub centers: BTreeMap<String, (f64, f64)>,
}

enum Target {
    Response,
    Column(usize),
}

fn target(ds: &SpatialDataset, name: &str, action: TransformAction) -> Result<Target> {
    if name == ds.response_name() {
        return Ok(Target::Response);
    }
    let j = ds
        .column_index(name)
        .ok_or_else(|| SvmmaError::MissingColumn(name.to_string()))?;
    if j == 0 && ds.has_intercept() && action != TransformAction::Identity {
        return Err(column_error(
            name,
            "the intercept column must stay identity",
        ));
    }
    Ok(Target::Column(j))
}

fn column_values(ds: &SpatialDataset, t: &Target) -> Vec<f64> {
    match t {
        Target::Response => ds.response.iter().cloned().collect(),
        Target::Column(j) => ds.covariates.column(*j).iter().cloned().collect(),
    }
}

/// Estimates standardization constants for `spec` on `reference`.
pub fn fit_transforms(
    reference: &SpatialDataset,
    spec: &TransformSpec,
) -> Result<FittedTransforms> {
    let mut centers = BTreeMap::new();
    for (name, &action) in &spec.actions {
        let t = target(reference, name, action)?;
        if action == TransformAction::Standardize {
            centers.insert(
                name.clone(),
                standardization(name, &column_values(reference, &t))?,
            );
        }
    }
    Ok(FittedTransforms {
        spec: spec.clone(),
        centers,
    })
}

impl FittedTransforms {
    pub fn apply(&self, ds: &SpatialDataset) -> Result<SpatialDataset> {
        let mut covariates = ds.covariates.clone();
        let mut response = ds.response.clone();
        for (name, &action) in &self.spec.actions {
            let center = self.centers.get(name).copied();
            match target(ds, name, action)? {
                Target::Response => {
                    transform_column(name, response.as_mut_slice(), action, center)?
                }
                Target::Column(j) => {
                    let mut col: Vec<f64> = covariates.column(j).iter().cloned().collect();
                    transform_column(name, &mut col, action, center)?;
                    covariates.set_column(j, &DVector::from_vec(col));
                }
            }
        }
        SpatialDataset::new(
            ds.locations.clone(),
            covariates,
            response,
            ds.column_names.clone(),
            ds.response_name.clone(),
        )
    }
}

/// Applies `spec` with standardization constants from `ds` itself.
pub fn apply_transforms(ds: &SpatialDataset, spec: &TransformSpec) -> Result<SpatialDataset> {
    fit_transforms(ds, spec)?.apply(ds)
}

/// Row indices of a seeded random train/test partition. Both index lists are
/// sorted ascending.
pub fn split_indices(n: usize, n0: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n0 < 1 || n0 >= n {
        return Err(SvmmaError::InvalidArgument(format!(
            "training size {n0} must satisfy 1 <= n0 < n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train: Vec<usize> = rand::seq::index::sample(&mut rng, n, n0).into_vec();
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

pub fn split_train_test(
    ds: &SpatialDataset,
    n0: usize,
    seed: u64,
) -> Result<(SpatialDataset, SpatialDataset)> {
    let (train, test) = split_indices(ds.n(), n0, seed)?;
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}

/// Integer square root when `n` is a perfect square.
pub fn exact_sqrt(n: usize) -> Option<usize> {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

/// Grid points `(j/k, l/k)` for `j, l = 1..k`, `k = sqrt(n)`, row-major.
pub fn unit_square_grid(n: usize) -> Result<Vec<[f64; 2]>> {
    let k = exact_sqrt(n)
        .filter(|&k| k > 0)
        .ok_or_else(|| SvmmaError::InvalidArgument(format!("{n} is not a perfect square")))?;
    let kf = k as f64;
    Ok((1..=k)
        .flat_map(|j| (1..=k).map(move |l| [j as f64 / kf, l as f64 / kf]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(col: Vec<f64>) -> SpatialDataset {
        let n = col.len();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { col[i] });
        SpatialDataset::new(
            (0..n).map(|i| [i as f64, 0.0]).collect(),
            x,
            DVector::from_element(n, 1.0),
            vec![INTERCEPT_NAME.into(), "a".into()],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn log_sqrt_standardize() {
        let e = std::f64::consts::E;
        let spec = TransformSpec::default().with("a", TransformAction::NaturalLog);
        let out = apply_transforms(&toy(vec![1.0, e, e * e]), &spec).unwrap();
        let got: Vec<f64> = out.covariates().column(1).iter().cloned().collect();
        for (g, w) in got.iter().zip([0.0, 1.0, 2.0]) {
            assert!((g - w).abs() < 1e-15);
        }

        let spec = TransformSpec::default().with("a", TransformAction::SquareRoot);
        let out = apply_transforms(&toy(vec![4.0, 9.0]), &spec).unwrap();
        assert_eq!(out.covariates()[(0, 1)], 2.0);
        assert_eq!(out.covariates()[(1, 1)], 3.0);

        let spec = TransformSpec::default().with("a", TransformAction::Standardize);
        let out = apply_transforms(&toy(vec![1.0, 2.0, 3.0]), &spec).unwrap();
        let got: Vec<f64> = out.covariates().column(1).iter().cloned().collect();
        assert_eq!(got, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn transform_domain_errors() {
        let log = TransformSpec::default().with("a", TransformAction::NaturalLog);
        assert!(matches!(
            apply_transforms(&toy(vec![1.0, 0.0]), &log),
            Err(SvmmaError::InvalidTransform { .. })
        ));
        let sqrt = TransformSpec::default().with("a", TransformAction::SquareRoot);
        assert!(apply_transforms(&toy(vec![1.0, -1.0]), &sqrt).is_err());
        let std = TransformSpec::default().with("a", TransformAction::Standardize);
        assert!(apply_transforms(&toy(vec![2.0, 2.0]), &std).is_err());
        let icpt = TransformSpec::default().with(INTERCEPT_NAME, TransformAction::NaturalLog);
        assert!(apply_transforms(&toy(vec![2.0, 3.0]), &icpt).is_err());
    }

    #[test]
    fn transforms_response_by_name() {
        let spec = TransformSpec::parse("y=sqrt").unwrap();
        let ds = toy(vec![1.0, 2.0])
            .with_response(DVector::from_vec(vec![4.0, 16.0]))
            .unwrap();
        let out = apply_transforms(&ds, &spec).unwrap();
        assert_eq!(out.response().as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn fitted_constants_carry_over() {
        let spec = TransformSpec::default().with("a", TransformAction::Standardize);
        let reference = toy(vec![1.0, 2.0, 3.0]);
        let fitted = fit_transforms(&reference, &spec).unwrap();
        assert_eq!(fitted.centers["a"], (2.0, 1.0));
        let other = fitted.apply(&toy(vec![5.0, 0.0])).unwrap();
        assert_eq!(other.covariates().column(1).as_slice(), &[3.0, -2.0]);
        assert_eq!(
            apply_transforms(&reference, &spec).unwrap(),
            fitted.apply(&reference).unwrap()
        );
    }

    #[test]
    fn identity_spec_is_noop() {
        let ds = toy(vec![0.3, -2.0, 5.0]);
        let spec = TransformSpec::default().with("a", TransformAction::Identity);
        let once = apply_transforms(&ds, &spec).unwrap();
        assert_eq!(once, ds);
        assert_eq!(apply_transforms(&once, &spec).unwrap(), ds);
    }

    #[test]
    fn grid_points() {
        let g = unit_square_grid(4).unwrap();
        assert_eq!(g, vec![[0.5, 0.5], [0.5, 1.0], [1.0, 0.5], [1.0, 1.0]]);
        let g = unit_square_grid(225).unwrap();
        assert_eq!(g.len(), 225);
        let max = g.iter().flatten().cloned().fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        assert!(unit_square_grid(5).is_err());
        assert!(unit_square_grid(0).is_err());
    }

    #[test]
    fn grid_points_distinct_in_unit_square() {
        for n in [1, 9, 100, 169] {
            let g = unit_square_grid(n).unwrap();
            let set: HashSet<(u64, u64)> =
                g.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
            assert_eq!(set.len(), n);
            assert!(g.iter().flatten().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (train, test) = split_indices(689, 400, 3).unwrap();
        assert_eq!(train.len(), 400);
        assert_eq!(test.len(), 289);
        let (_, test) = split_indices(10, 9, 3).unwrap();
        assert_eq!(test.len(), 1);
        assert_eq!(
            split_indices(689, 400, 3).unwrap(),
            split_indices(689, 400, 3).unwrap()
        );
        assert!(split_indices(10, 0, 1).is_err());
        assert!(split_indices(10, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_rows(n in 2usize..300, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let n0 = 1 + ((n - 1) as f64 * frac) as usize;
            let n0 = n0.min(n - 1);
            let (train, test) = split_indices(n, n0, seed).unwrap();
            prop_assert_eq!(train.len(), n0);
            let mut all: Vec<usize> = train.iter().chain(test.iter()).cloned().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
