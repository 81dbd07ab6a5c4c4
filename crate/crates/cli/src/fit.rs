use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use svmma::ensemble::{Method, SvcmEnsemble};
use svmma::{apply_transforms, VarianceMode, WeightVector};

use crate::args::{describe, ensure_dir, ModelArgs, SchemaArgs};
use crate::manifest::{csv_bytes, RunManifest};

/// Weighting and selection rules reported by `fit`.
pub const FIT_METHODS: [Method; 6] = [
    Method::SvmmaPlugin,
    Method::Saic,
    Method::Sbic,
    Method::Aic,
    Method::Bic,
    Method::Aicc,
];

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Weights at or below this value are left out of the weight table.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Selection {
    index: usize,
    covariates: String,
}

#[derive(Serialize)]
struct FitSummary {
    n: usize,
    candidates: usize,
    sigma2_plugin: f64,
    selections: BTreeMap<&'static str, Selection>,
    mse: BTreeMap<&'static str, f64>,
}

pub fn run(args: &FitArgs) -> Result<u8> {
    if !(args.threshold >= 0.0) {
        bail!("threshold {} must be nonnegative", args.threshold);
    }
    let raw = args.schema.load(&args.data)?;
    let ds = Arc::new(apply_transforms(&raw, &args.schema.transforms()?)?);
    let cs = args.model.candidate_set(&ds)?;
    let out = ensure_dir(&args.out)?;
    let mut manifest = RunManifest::start("fit", serde_json::to_value(args)?, None);

    let ens = SvcmEnsemble::fit(&ds, cs.models(), &args.model.grid()?, args.model.loocv)?;
    let f = ens.fitted_matrix();
    let y = ds.response();
    let n = ds.n();
    let weights: Vec<(Method, WeightVector)> = FIT_METHODS
        .iter()
        .map(|&m| Ok((m, ens.weights(m, None)?)))
        .collect::<Result<_>>()?;

    let names: Vec<String> = ens
        .fits()
        .iter()
        .map(|fit| describe(&ds, &fit.model().columns))
        .collect();
    let rows = ens.fits().iter().enumerate().map(|(i, fit)| {
        let c = &ens.criteria()[i];
        let mut row = vec![
            (i + 1).to_string(),
            names[i].clone(),
            fit.bandwidth().to_string(),
            fit.hat_trace().to_string(),
            fit.rss().to_string(),
            c.aic.to_string(),
            c.bic.to_string(),
            c.aicc.to_string(),
        ];
        row.extend(weights[..3].iter().map(|(_, w)| w[i].to_string()));
        row
    });
    let header = [
        "candidate",
        "covariates",
        "bandwidth",
        "trace",
        "rss",
        "aic",
        "bic",
        "aicc",
        "w_svmma",
        "w_saic",
        "w_sbic",
    ];
    manifest.write(&out, "candidates.csv", &csv_bytes(&header, rows)?)?;

    let mut table = Vec::new();
    for (m, w) in &weights[..3] {
        let mut kept: Vec<usize> = (0..w.len()).filter(|&i| w[i] > args.threshold).collect();
        kept.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        for i in kept {
            table.push(vec![
                m.name().to_string(),
                (i + 1).to_string(),
                names[i].clone(),
                w[i].to_string(),
            ]);
        }
    }
    if table.is_empty() {
        eprintln!(
            "note: no candidate weight exceeds {}; weight table is empty",
            args.threshold
        );
    }
    manifest.write(
        &out,
        "weight_table.csv",
        &csv_bytes(&["method", "candidate", "covariates", "weight"], table)?,
    )?;

    let mut summary = FitSummary {
        n,
        candidates: ens.len(),
        sigma2_plugin: ens.problem(VarianceMode::PlugIn)?.sigma2(),
        selections: BTreeMap::new(),
        mse: BTreeMap::new(),
    };
    for (m, w) in &weights {
        let resid = y - &f * w.to_dvector();
        summary
            .mse
            .insert(m.name(), resid.norm_squared() / n as f64);
        if matches!(m, Method::Aic | Method::Bic | Method::Aicc) {
            let index = (0..w.len()).find(|&i| w[i] == 1.0).unwrap_or(0);
            summary.selections.insert(
                m.name(),
                Selection {
                    index: index + 1,
                    covariates: names[index].clone(),
                },
            );
        }
    }
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    manifest.write(&out, "summary.json", text.as_bytes())?;
    manifest.finish(&out)?;

    println!("{} candidates fitted on n = {n}", ens.len());
    for (m, mse) in &summary.mse {
        println!("  {m:<14} in-sample MSE {mse:.6}");
    }
    Ok(0)
}
