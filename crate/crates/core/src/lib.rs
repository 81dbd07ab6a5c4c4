//! Spatially varying coefficient model averaging.
//!
//! Each candidate model is a local-constant geographically weighted
//! regression on a subset of covariates with its own cross-validated
//! bandwidth. Candidates are combined with weights on the probability simplex
//! chosen by a Mallows criterion, with smoothed information-criterion weights,
//! single-model selection and linear-model averaging available as baselines.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod candidates;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod gwr;
pub mod kernels;
mod linalg;
pub mod linear;
pub mod simulation;

pub use averaging::{
    combine_predictions, criterion_value, info_criteria, select_min, simplex_qp, smoothed_weights,
    solve_weights, tau_sum, InfoCriteria, MallowsProblem, SmoothedKind, VarianceMode, WeightVector,
};
pub use candidates::{
    all_subsets, nested_count_rule, nested_set, quasi_correct_flags, CandidateSet,
};
pub use data::{
    apply_transforms, fit_transforms, load_csv, split_train_test, unit_square_grid, CsvSchema,
    FittedTransforms, SpatialDataset, TransformAction, TransformSpec,
};
pub use error::{Result, SvmmaError};
pub use gwr::{
    fit_candidate, fit_local, hat_row, loocv_bandwidth, predict_at, sigma2_largest, sigma2_naive,
    BandwidthGrid, BandwidthSelection, CandidateModel, FittedCandidate, LoocvMethod,
};
pub use kernels::{
    distance, kernel_eval, scaled_kernel, weight_diagonal, DistanceSpec, Kernel, KernelKind,
};
pub use linear::{jma_weights, linear_ic_select, mma_weights, ols_fit, LinearFit};
