use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use svmma::candidates::{all_subsets_with_intercept, MAX_SUBSET_COLUMNS};
use svmma::{
    all_subsets, load_csv, nested_set, BandwidthGrid, CandidateSet, CsvSchema, DistanceSpec,
    Kernel, KernelKind, LoocvMethod, SpatialDataset, TransformSpec,
};

/// Column roles shared by the data commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SchemaArgs {
    /// Column holding the first location coordinate.
    #[arg(long = "x", default_value = "X")]
    pub x: String,
    /// Column holding the second location coordinate.
    #[arg(long = "y", default_value = "Y")]
    pub y: String,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Comma-separated covariate columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Do not prepend an intercept column.
    #[arg(long)]
    pub no_intercept: bool,
    /// Per-column transforms, e.g. `STN=log,SOC=standardize`.
    #[arg(long, default_value = "")]
    pub transform: String,
}

/// Candidate set and local-fit settings.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// `nested:M` or `all-subsets`.
    #[arg(long, default_value = "all-subsets")]
    pub candidates: String,
    #[arg(long, default_value = "gaussian", value_parser = parse_kernel)]
    #[serde(serialize_with = "serialize_display")]
    pub kernel: KernelKind,
    /// Exponent of the Minkowski distance between locations.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// `rel:POINTS:LOWER:UPPER` (multiples of the largest pairwise distance)
    /// or `list:h1,h2,...`.
    #[arg(long, default_value = "rel:30:0.05:2")]
    pub bandwidth_grid: String,
    /// `refit` or `leverage`.
    #[arg(long, default_value = "refit", value_parser = parse_loocv)]
    #[serde(serialize_with = "serialize_debug")]
    pub loocv: LoocvMethod,
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    s.parse().map_err(|e: svmma::SvmmaError| e.to_string())
}

fn parse_loocv(s: &str) -> std::result::Result<LoocvMethod, String> {
    s.parse().map_err(|e: svmma::SvmmaError| e.to_string())
}

fn serialize_display<S: serde::Serializer>(k: &KernelKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match k {
        KernelKind::Gaussian => "gaussian",
        KernelKind::Bisquare => "bisquare",
    })
}

fn serialize_debug<S: serde::Serializer>(m: &LoocvMethod, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{m:?}").to_lowercase())
}

impl SchemaArgs {
    pub fn transforms(&self) -> Result<TransformSpec> {
        Ok(TransformSpec::parse(&self.transform)?)
    }

    /// Schema for `path`, filling in default covariates from its header.
    pub fn schema_for(&self, path: &Path) -> Result<CsvSchema> {
        let covariates = if self.covariates.is_empty() {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(path)
                .with_context(|| format!("reading {}", path.display()))?;
            reader
                .headers()?
                .iter()
                .filter(|h| *h != self.x && *h != self.y && *h != self.response)
                .map(str::to_string)
                .collect()
        } else {
            self.covariates.clone()
        };
        if covariates.is_empty() {
            bail!("{} has no covariate columns", path.display());
        }
        Ok(CsvSchema {
            location_columns: [self.x.clone(), self.y.clone()],
            response_column: self.response.clone(),
            covariate_columns: covariates,
            add_intercept: !self.no_intercept,
        })
    }

    pub fn load(&self, path: &Path) -> Result<SpatialDataset> {
        let schema = self.schema_for(path)?;
        load_csv(path, &schema).with_context(|| format!("loading {}", path.display()))
    }
}

impl ModelArgs {
    pub fn distance(&self) -> Result<DistanceSpec> {
        Ok(DistanceSpec::new(self.q)?)
    }

    pub fn grid(&self) -> Result<BandwidthGrid> {
        Ok(BandwidthGrid::parse(&self.bandwidth_grid)?)
    }

    /// Builds the candidate set for `ds`. With an intercept present,
    /// all-subsets keeps it in every model and enumerates the rest.
    pub fn candidate_set(&self, ds: &SpatialDataset) -> Result<CandidateSet> {
        let kernel = Kernel::new(self.kernel);
        let distance = self.distance()?;
        let p = ds.p();
        if let Some(m) = self.candidates.strip_prefix("nested:") {
            let m: usize = m
                .parse()
                .with_context(|| format!("bad nested candidate count `{m}`"))?;
            if m > p {
                bail!("nested:{m} needs at least {m} covariate columns, the data has {p}");
            }
            return Ok(nested_set(p, m, kernel, distance)?);
        }
        if self.candidates != "all-subsets" {
            bail!(
                "unknown candidate set `{}` (expected nested:M or all-subsets)",
                self.candidates
            );
        }
        let free = if ds.has_intercept() { p - 1 } else { p };
        if free > MAX_SUBSET_COLUMNS {
            bail!("all-subsets supports at most {MAX_SUBSET_COLUMNS} covariates, got {free}");
        }
        Ok(if ds.has_intercept() {
            all_subsets_with_intercept(p, kernel, distance)?
        } else {
            all_subsets(p, kernel, distance)?
        })
    }
}

/// Describes a candidate by its column names.
pub fn describe(ds: &SpatialDataset, columns: &[usize]) -> String {
    columns
        .iter()
        .map(|&j| ds.column_names()[j].as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Rows of `b` appended to `a`; the schemas must agree.
pub fn stack(a: &SpatialDataset, b: &SpatialDataset) -> Result<SpatialDataset> {
    if a.column_names() != b.column_names() || a.response_name() != b.response_name() {
        bail!("training and test files have different columns");
    }
    let (na, nb, p) = (a.n(), b.n(), a.p());
    let x = DMatrix::from_fn(na + nb, p, |i, j| {
        if i < na {
            a.covariates()[(i, j)]
        } else {
            b.covariates()[(i - na, j)]
        }
    });
    let y = DVector::from_iterator(
        na + nb,
        a.response().iter().chain(b.response().iter()).cloned(),
    );
    let locations = a.locations().iter().chain(b.locations()).cloned().collect();
    Ok(SpatialDataset::new(
        locations,
        x,
        y,
        a.column_names().to_vec(),
        a.response_name(),
    )?)
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.to_path_buf())
}
