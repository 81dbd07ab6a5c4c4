use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, oracle_weights, relative_risk, DesignConfig};
use crate::averaging::{criterion_value, tau_sum, VarianceMode};
use crate::ensemble::{LinearEnsemble, Method, SvcmEnsemble};
use crate::error::{Result, SvmmaError};

/// Losses and diagnostics for one successful replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub c: f64,
    pub sigma2_true: f64,
    /// CV bandwidth per candidate; empty when only linear methods ran.
    pub bandwidths: Vec<f64>,
    /// `||mu_hat - mu||^2` per method.
    pub losses: BTreeMap<Method, f64>,
    /// Weight on quasi-correct candidates, for designs that have them.
    pub taus: BTreeMap<Method, f64>,
    /// Mallows criterion at the chosen weights divided by `n`.
    pub criterion_per_n: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replications: usize,
    pub mean_loss: f64,
    pub mse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_risk_oracle_svcma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_risk_oracle_linear: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_tau: Option<f64>,
}

/// Aggregated outcome of a simulation run. Contains no timing information,
/// so reruns of a configuration serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub config: DesignConfig,
    pub methods: Vec<Method>,
    pub summaries: Vec<MethodSummary>,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<ReplicationFailure>,
}

impl RiskReport {
    /// Per-replication losses of a method, in replication order.
    pub fn losses(&self, method: Method) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.losses.get(&method).copied())
            .collect()
    }

    pub fn taus(&self, method: Method) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.taus.get(&method).copied())
            .collect()
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long format: one row per replication and method.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "design",
            "n",
            "alpha",
            "r2",
            "case",
            "method",
            "replication",
            "loss",
            "tau",
        ])?;
        let cfg = &self.config;
        for r in &self.records {
            for m in &self.methods {
                let Some(loss) = r.losses.get(m) else {
                    continue;
                };
                let tau = r.taus.get(m).map(|t| t.to_string()).unwrap_or_default();
                w.write_record([
                    cfg.design.to_string(),
                    cfg.n.to_string(),
                    cfg.alpha.to_string(),
                    cfg.r2.to_string(),
                    cfg.error_case.to_string(),
                    m.name().to_string(),
                    r.replication.to_string(),
                    loss.to_string(),
                    tau,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Runs one replication of the design with the given methods.
pub fn run_replication(
    config: &DesignConfig,
    methods: &[Method],
    replication: usize,
) -> Result<ReplicationRecord> {
    let sample = generate(config, replication)?;
    let ds = Arc::new(sample.dataset);
    let cs = config.candidate_set()?;
    let mu = &sample.mu;
    let n = ds.n() as f64;

    let svcm = if methods.iter().any(|m| !m.is_linear()) {
        Some(SvcmEnsemble::fit(
            &ds,
            cs.models(),
            &config.grid,
            config.loocv,
        )?)
    } else {
        None
    };
    let linear = if methods.iter().any(|m| m.is_linear()) {
        Some(LinearEnsemble::fit(&ds, cs.models())?)
    } else {
        None
    };

    let mut record = ReplicationRecord {
        replication,
        seed: config.seed.wrapping_add(replication as u64),
        c: sample.c,
        sigma2_true: sample.sigma2_true,
        bandwidths: svcm.as_ref().map(|s| s.bandwidths()).unwrap_or_default(),
        losses: BTreeMap::new(),
        taus: BTreeMap::new(),
        criterion_per_n: BTreeMap::new(),
    };
    let svcm_f = svcm.as_ref().map(|s| s.fitted_matrix());
    let linear_f = linear.as_ref().map(|l| l.fitted_matrix());

    for &method in methods {
        let (w, f) = if method.is_linear() {
            let (lin, f) = (
                linear.as_ref().expect("linear fitted"),
                linear_f.as_ref().expect("linear fitted"),
            );
            let w = match method {
                Method::OracleLinear => oracle_weights(f, mu)?,
                m => lin.weights(m)?,
            };
            (w, f)
        } else {
            let (sv, f) = (
                svcm.as_ref().expect("svcm fitted"),
                svcm_f.as_ref().expect("svcm fitted"),
            );
            let w = match method {
                Method::OracleSvcma => oracle_weights(f, mu)?,
                m => sv.weights(m, Some(sample.sigma2_true))?,
            };
            match method {
                Method::SvmmaKnownSigma => {
                    let mp = sv.problem(VarianceMode::Known(sample.sigma2_true))?;
                    record
                        .criterion_per_n
                        .insert(method, criterion_value(&mp, &w)? / n);
                }
                Method::SvmmaPlugin => {
                    let mp = sv.problem(VarianceMode::PlugIn)?;
                    record
                        .criterion_per_n
                        .insert(method, criterion_value(&mp, &w)? / n);
                }
                _ => {}
            }
            (w, f)
        };
        let estimate: DVector<f64> = f * w.to_dvector();
        record.losses.insert(method, (estimate - mu).norm_squared());
        if let Some(flags) = cs.quasi_correct() {
            record.taus.insert(method, tau_sum(&w, flags)?);
        }
    }
    Ok(record)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs every replication on the current rayon pool. Results land in
/// replication order whatever the thread count. Failed replications are
/// listed and excluded from all methods.
pub fn run_replications(config: &DesignConfig, methods: &[Method]) -> Result<RiskReport> {
    config.validate()?;
    if methods.is_empty() {
        return Err(SvmmaError::InvalidArgument("no methods requested".into()));
    }
    let mut methods = methods.to_vec();
    methods.dedup();
    let outcomes: Vec<Result<ReplicationRecord>> = (0..config.replications)
        .into_par_iter()
        .map(|j| run_replication(config, &methods, j))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (j, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e) => failures.push(ReplicationFailure {
                replication: j,
                message: e.to_string(),
            }),
        }
    }
    let mut report = RiskReport {
        config: config.clone(),
        methods: methods.clone(),
        summaries: Vec::new(),
        records,
        failures,
    };
    if report.records.is_empty() {
        return Ok(report);
    }
    let n = config.n as f64;
    let oracle_svcma = report.losses(Method::OracleSvcma);
    let oracle_linear = report.losses(Method::OracleLinear);
    for &m in &methods {
        let losses = report.losses(m);
        let taus = report.taus(m);
        let ml = mean(&losses);
        report.summaries.push(MethodSummary {
            method: m,
            replications: losses.len(),
            mean_loss: ml,
            mse: ml / n,
            relative_risk_oracle_svcma: (!oracle_svcma.is_empty())
                .then(|| relative_risk(&losses, &oracle_svcma).ok())
                .flatten(),
            relative_risk_oracle_linear: (!oracle_linear.is_empty())
                .then(|| relative_risk(&losses, &oracle_linear).ok())
                .flatten(),
            mean_tau: (!taus.is_empty()).then(|| mean(&taus)),
        });
    }
    Ok(report)
}
