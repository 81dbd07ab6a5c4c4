//! Candidate-model sets: nested sequences and all nonempty subsets.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvmmaError};
use crate::gwr::CandidateModel;
use crate::kernels::{DistanceSpec, Kernel};

/// Largest number of columns accepted by [`all_subsets`].
pub const MAX_SUBSET_COLUMNS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    models: Vec<CandidateModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quasi_correct: Option<Vec<bool>>,
}

impl CandidateSet {
    pub fn new(models: Vec<CandidateModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(SvmmaError::InvalidArgument("empty candidate set".into()));
        }
        Ok(Self {
            models,
            quasi_correct: None,
        })
    }

    pub fn models(&self) -> &[CandidateModel] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn quasi_correct(&self) -> Option<&[bool]> {
        self.quasi_correct.as_deref()
    }

    pub fn with_quasi_correct(mut self, true_support: &[usize]) -> Self {
        self.quasi_correct = Some(quasi_correct_flags(&self, true_support));
        self
    }

    /// Replaces each model's bandwidth. `bandwidths` follows model order.
    pub fn with_bandwidths(mut self, bandwidths: &[f64]) -> Result<Self> {
        if bandwidths.len() != self.models.len() {
            return Err(SvmmaError::DimensionMismatch(format!(
                "{} bandwidths for {} candidates",
                bandwidths.len(),
                self.models.len()
            )));
        }
        for (m, &h) in self.models.iter_mut().zip(bandwidths) {
            m.bandwidth = Some(h);
        }
        Ok(self)
    }

    /// Index of the candidate with the most columns; ties go to the first.
    pub fn largest(&self) -> usize {
        let mut best = 0;
        for (i, m) in self.models.iter().enumerate() {
            if m.dim() > self.models[best].dim() {
                best = i;
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `floor(3 n^(1/3))`, corrected so that `(M/3)^3 <= n < ((M+1)/3)^3`
/// holds in exact integer arithmetic, i.e. `M^3 <= 27 n < (M+1)^3`.
pub fn nested_count_rule(n: usize) -> usize {
    let target = 27u128 * n as u128;
    let mut m = (3.0 * (n as f64).cbrt()).floor() as u128;
    while m > 0 && m * m * m > target {
        m -= 1;
    }
    while (m + 1) * (m + 1) * (m + 1) <= target {
        m += 1;
    }
    m as usize
}

/// Model `m` (1-based) uses the first `m` columns.
pub fn nested_set(
    p_total: usize,
    m_count: usize,
    kernel: impl Into<Kernel>,
    distance: DistanceSpec,
) -> Result<CandidateSet> {
    if m_count == 0 || m_count > p_total {
        return Err(SvmmaError::InvalidArgument(format!(
            "nested set needs 1 <= M <= p, got M = {m_count}, p = {p_total}"
        )));
    }
    let kernel = kernel.into();
    let models = (1..=m_count)
        .map(|m| CandidateModel::new((0..m).collect(), kernel, distance))
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(models)
}

/// Column subsets of `columns`, ordered by size and then lexicographically
/// by position.
fn subsets_of(columns: &[usize]) -> Vec<Vec<usize>> {
    let p = columns.len();
    let mut out = Vec::with_capacity((1usize << p) - 1);
    let mut combo: Vec<usize> = Vec::with_capacity(p);
    for size in 1..=p {
        combo.clear();
        combo.extend(0..size);
        loop {
            out.push(combo.iter().map(|&i| columns[i]).collect());
            // Advance to the next combination in lexicographic order.
            let mut k = size;
            while k > 0 && combo[k - 1] == p - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            combo[k - 1] += 1;
            for j in k..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// All `2^p - 1` nonempty subsets of columns `0..p`.
pub fn all_subsets(
    p: usize,
    kernel: impl Into<Kernel>,
    distance: DistanceSpec,
) -> Result<CandidateSet> {
    check_subset_count(p)?;
    let kernel = kernel.into();
    let cols: Vec<usize> = (0..p).collect();
    let models = subsets_of(&cols)
        .into_iter()
        .map(|c| CandidateModel::new(c, kernel, distance))
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(models)
}

/// Column 0 (the intercept) in every model plus each nonempty subset of
/// columns `1..p`, giving `2^(p-1) - 1` models.
pub fn all_subsets_with_intercept(
    p: usize,
    kernel: impl Into<Kernel>,
    distance: DistanceSpec,
) -> Result<CandidateSet> {
    if p < 2 {
        return Err(SvmmaError::InvalidArgument(
            "need at least one column besides the intercept".into(),
        ));
    }
    check_subset_count(p - 1)?;
    let kernel = kernel.into();
    let cols: Vec<usize> = (1..p).collect();
    let models = subsets_of(&cols)
        .into_iter()
        .map(|s| {
            let mut c = vec![0];
            c.extend(s);
            CandidateModel::new(c, kernel, distance)
        })
        .collect::<Result<Vec<_>>>()?;
    CandidateSet::new(models)
}

fn check_subset_count(p: usize) -> Result<()> {
    if p == 0 || p > MAX_SUBSET_COLUMNS {
        return Err(SvmmaError::InvalidArgument(format!(
            "all-subsets needs 1 <= p <= {MAX_SUBSET_COLUMNS}, got {p}"
        )));
    }
    Ok(())
}

/// `true` for candidates whose columns contain `true_support`.
pub fn quasi_correct_flags(cs: &CandidateSet, true_support: &[usize]) -> Vec<bool> {
    cs.models
        .iter()
        .map(|m| true_support.iter().all(|t| m.columns.contains(t)))
        .collect()
}
