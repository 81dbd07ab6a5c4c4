use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde_json::{Map, Value};
use svmma::ensemble::{parse_methods, Method};
use svmma::simulation::{run_replications, DesignConfig};

use crate::args::ensure_dir;
use crate::manifest::RunManifest;

pub const SCHEMA: &str = "svmma.simulate/1";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON configuration with a `"schema": "svmma.simulate/1"` key.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured replication count.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated methods; overrides the configured list.
    #[arg(long)]
    pub methods: Option<String>,
}

/// A parsed configuration file: design settings plus the method list.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub design: DesignConfig,
    pub methods: Vec<Method>,
}

impl SimulateConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let Value::Object(mut map) = value else {
            bail!("config must be a JSON object");
        };
        match map.remove("schema") {
            Some(Value::String(s)) if s == SCHEMA => {}
            Some(other) => bail!("`schema`: expected \"{SCHEMA}\", got {other}"),
            None => bail!("`schema`: missing (expected \"{SCHEMA}\")"),
        }
        let methods = match map.remove("methods") {
            Some(v) => {
                serde_json::from_value::<Vec<Method>>(v).map_err(|e| anyhow!("`methods`: {e}"))?
            }
            None => Vec::new(),
        };
        let design: DesignConfig = serde_json::from_value(Value::Object(map))
            .map_err(|e| anyhow!("invalid config: {e}"))?;
        let methods = if methods.is_empty() {
            design.default_methods()
        } else {
            methods
        };
        Ok(Self { design, methods })
    }

    /// Canonical JSON that parses back to the same configuration.
    pub fn to_json(&self) -> Result<String> {
        let mut map = Map::new();
        map.insert("schema".into(), Value::String(SCHEMA.into()));
        let Value::Object(design) = serde_json::to_value(&self.design)? else {
            unreachable!("design config serializes to an object");
        };
        map.extend(design);
        map.insert("methods".into(), serde_json::to_value(&self.methods)?);
        Ok(serde_json::to_string_pretty(&Value::Object(map))? + "\n")
    }
}

/// Returns the process exit code: 0 when every replication succeeded, 2
/// when some were excluded.
pub fn run(args: &SimulateArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = SimulateConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.design.seed = seed;
    }
    if let Some(r) = args.replications {
        cfg.design.replications = r;
    }
    if let Some(m) = &args.methods {
        cfg.methods = parse_methods(m)?;
    }
    cfg.design.validate()?;

    let out = ensure_dir(&args.out)?;
    let echo = cfg.to_json()?;
    let mut manifest = RunManifest::start(
        "simulate",
        serde_json::from_str(&echo)?,
        Some(cfg.design.seed),
    );
    let report = run_replications(&cfg.design, &cfg.methods)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    manifest.write(&out, "config.json", echo.as_bytes())?;
    manifest.write(&out, "risk.csv", &csv)?;
    manifest.write(&out, "report.json", (report.to_json()? + "\n").as_bytes())?;
    manifest.finish(&out)?;

    println!(
        "{:<18} {:>5} {:>12} {:>10} {:>10} {:>8}",
        "method", "reps", "mean_loss", "rr_svcma", "rr_linear", "tau"
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    for s in &report.summaries {
        println!(
            "{:<18} {:>5} {:>12.4} {:>10} {:>10} {:>8}",
            s.method.name(),
            s.replications,
            s.mean_loss,
            opt(s.relative_risk_oracle_svcma),
            opt(s.relative_risk_oracle_linear),
            opt(s.mean_tau)
        );
    }
    for f in &report.failures {
        eprintln!("replication {} excluded: {}", f.replication, f.message);
    }
    Ok(if report.failures.is_empty() { 0 } else { 2 })
}
