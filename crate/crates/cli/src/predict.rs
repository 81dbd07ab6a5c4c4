use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use svmma::data::split_indices;
use svmma::ensemble::{parse_methods, LinearEnsemble, Method, SvcmEnsemble};
use svmma::{fit_transforms, SpatialDataset, TransformSpec};

use crate::args::{ensure_dir, stack, ModelArgs, SchemaArgs};
use crate::manifest::{csv_bytes, RunManifest};

/// Which rows standardization constants are estimated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformScope {
    /// All rows, training and test together.
    Full,
    /// Training rows only, then carried over to the test rows.
    Train,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Full dataset, split at random with `--split`.
    #[arg(long, conflicts_with_all = ["train", "test"], requires = "split")]
    pub data: Option<PathBuf>,
    /// Training rows for a single fixed split.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Training sample size for random splits.
    #[arg(long)]
    pub split: Option<usize>,
    /// Repeat `r` uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long, default_value = "svmma,saic,sbic,aic,bic,aicc")]
    pub methods: String,
    #[arg(long, value_enum, default_value_t = TransformScope::Full)]
    pub transform_scope: TransformScope,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Prediction errors of every method on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub mspe: Vec<(Method, f64)>,
}

fn transformed(
    reference: &SpatialDataset,
    spec: &TransformSpec,
    parts: [&SpatialDataset; 2],
) -> Result<[SpatialDataset; 2]> {
    let fitted = fit_transforms(reference, spec)?;
    Ok([fitted.apply(parts[0])?, fitted.apply(parts[1])?])
}

/// Fits on `train` and returns the test MSPE of each method, using weights
/// frozen at their training values.
pub fn evaluate(
    train: SpatialDataset,
    test: &SpatialDataset,
    methods: &[Method],
    model: &ModelArgs,
) -> Result<Vec<(Method, f64)>> {
    let train = Arc::new(train);
    let cs = model.candidate_set(&train)?;
    let k = test.n() as f64;
    let y = test.response();
    let svcm = if methods.iter().any(|m| !m.is_linear()) {
        let ens = SvcmEnsemble::fit(&train, cs.models(), &model.grid()?, model.loocv)?;
        let f = ens.predictions(test.locations(), test.covariates())?;
        Some((ens, f))
    } else {
        None
    };
    let linear = if methods.iter().any(|m| m.is_linear()) {
        let ens = LinearEnsemble::fit(&train, cs.models())?;
        let f = ens.predictions(test.covariates())?;
        Some((ens, f))
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| {
            let pred = if m.is_linear() {
                let (ens, f) = linear.as_ref().expect("linear candidates fitted");
                f * ens.weights(m)?.to_dvector()
            } else {
                let (ens, f) = svcm.as_ref().expect("local candidates fitted");
                f * ens.weights(m, None)?.to_dvector()
            };
            Ok((m, (y - pred).norm_squared() / k))
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run(args: &PredictArgs) -> Result<u8> {
    let methods = parse_methods(&args.methods)?;
    if let Some(bad) = methods.iter().find(|m| !m.is_feasible()) {
        bail!("method {bad} needs the true mean or variance and cannot be used on data");
    }
    if args.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let spec = args.schema.transforms()?;
    let outcomes: Vec<RepeatOutcome> = match (&args.data, &args.train, &args.test) {
        (Some(path), None, None) => {
            let n0 = args.split.expect("clap requires --split with --data");
            let full = args.schema.load(path)?;
            let full_fit = fit_transforms(&full, &spec)?;
            (0..args.repeat)
                .into_par_iter()
                .map(|r| {
                    let seed = args.seed.wrapping_add(r as u64);
                    let (tr, te) = split_indices(full.n(), n0, seed)?;
                    let (train, test) = (full.select_rows(&tr)?, full.select_rows(&te)?);
                    let [train, test] = match args.transform_scope {
                        TransformScope::Full => [full_fit.apply(&train)?, full_fit.apply(&test)?],
                        TransformScope::Train => transformed(&train, &spec, [&train, &test])?,
                    };
                    let mspe = evaluate(train, &test, &methods, &args.model)?;
                    Ok(RepeatOutcome {
                        repeat: r,
                        seed,
                        mspe,
                    })
                })
                .collect::<Result<_>>()?
        }
        (None, Some(tr), Some(te)) => {
            if args.split.is_some() || args.repeat != 1 {
                bail!("--split and --repeat apply only to --data");
            }
            let (train, test) = (args.schema.load(tr)?, args.schema.load(te)?);
            let reference = match args.transform_scope {
                TransformScope::Full => stack(&train, &test)?,
                TransformScope::Train => train.clone(),
            };
            let [train, test] = transformed(&reference, &spec, [&train, &test])?;
            let mspe = evaluate(train, &test, &methods, &args.model)?;
            vec![RepeatOutcome {
                repeat: 0,
                seed: args.seed,
                mspe,
            }]
        }
        _ => bail!("give either --data with --split, or both --train and --test"),
    };

    let out = ensure_dir(&args.out)?;
    let mut manifest = RunManifest::start("predict", serde_json::to_value(args)?, Some(args.seed));
    let rows = outcomes.iter().flat_map(|o| {
        o.mspe.iter().map(move |(m, v)| {
            vec![
                o.repeat.to_string(),
                o.seed.to_string(),
                m.name().to_string(),
                v.to_string(),
            ]
        })
    });
    manifest.write(
        &out,
        "mspe.csv",
        &csv_bytes(&["repeat", "seed", "method", "mspe"], rows)?,
    )?;

    let mut summary = Vec::new();
    println!(
        "{:<14} {:>7} {:>12} {:>12}",
        "method", "repeats", "mspe_mean", "mspe_median"
    );
    for (j, m) in methods.iter().enumerate() {
        let values: Vec<f64> = outcomes.iter().map(|o| o.mspe[j].1).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let med = median(values.clone());
        println!(
            "{:<14} {:>7} {:>12.6} {:>12.6}",
            m.name(),
            values.len(),
            mean,
            med
        );
        summary.push(vec![
            m.name().to_string(),
            values.len().to_string(),
            mean.to_string(),
            med.to_string(),
        ]);
    }
    manifest.write(
        &out,
        "summary.csv",
        &csv_bytes(&["method", "repeats", "mspe_mean", "mspe_median"], summary)?,
    )?;
    manifest.finish(&out)?;
    Ok(0)
}
