use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use svmma::gwr::loocv_bandwidth_with;
use svmma::{apply_transforms, BandwidthSelection};

use crate::args::{describe, ensure_dir, ModelArgs, SchemaArgs};
use crate::manifest::{csv_bytes, RunManifest};

#[derive(Debug, Args, Serialize)]
pub struct BandwidthArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Writes the leave-one-out CV curve of every candidate.
pub fn run(args: &BandwidthArgs) -> Result<u8> {
    let ds = apply_transforms(&args.schema.load(&args.data)?, &args.schema.transforms()?)?;
    let cs = args.model.candidate_set(&ds)?;
    let grid = args
        .model
        .grid()?
        .resolve(ds.locations(), args.model.distance()?)?;
    let out = ensure_dir(&args.out)?;
    let mut manifest = RunManifest::start("bandwidth", serde_json::to_value(args)?, None);

    let selections: Vec<BandwidthSelection> = cs
        .models()
        .par_iter()
        .map(|m| loocv_bandwidth_with(&ds, m, &grid, args.model.loocv))
        .collect::<svmma::Result<_>>()?;
    let names: Vec<String> = cs
        .models()
        .iter()
        .map(|m| describe(&ds, &m.columns))
        .collect();

    let mut curves = Vec::new();
    for (i, s) in selections.iter().enumerate() {
        for (h, cv) in s.grid.iter().zip(&s.cv_values) {
            curves.push(vec![
                (i + 1).to_string(),
                names[i].clone(),
                h.to_string(),
                cv.to_string(),
            ]);
        }
    }
    manifest.write(
        &out,
        "cv_curves.csv",
        &csv_bytes(&["candidate", "covariates", "bandwidth", "cv"], curves)?,
    )?;
    let chosen = selections.iter().enumerate().map(|(i, s)| {
        let best = s
            .grid
            .iter()
            .position(|&h| h == s.bandwidth)
            .map(|j| s.cv_values[j])
            .unwrap_or(f64::NAN);
        vec![
            (i + 1).to_string(),
            names[i].clone(),
            s.bandwidth.to_string(),
            best.to_string(),
        ]
    });
    manifest.write(
        &out,
        "bandwidths.csv",
        &csv_bytes(&["candidate", "covariates", "bandwidth", "cv"], chosen)?,
    )?;
    manifest.finish(&out)?;
    for (name, s) in names.iter().zip(&selections) {
        println!("{name:<40} h = {:.6}", s.bandwidth);
    }
    Ok(0)
}
