//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use svmma::simulation::{generate, Design, DesignConfig};
use svmma::SpatialDataset;

/// One Design 2 sample on an `n`-point grid with `m` nested candidates.
pub fn design2(n: usize, m: usize) -> (Arc<SpatialDataset>, DesignConfig) {
    let mut cfg = DesignConfig::new(Design::Two, n, 1.0, 0.7, 1);
    cfg.candidates = Some(m);
    let ds = generate(&cfg, 0).expect("valid design").dataset;
    (Arc::new(ds), cfg)
}

/// Mallows-shaped QP data: `m` fitted vectors sharing a common signal.
pub fn mallows_qp(n: usize, m: usize) -> (DMatrix<f64>, DVector<f64>) {
    // Deterministic pseudo-random entries without pulling in an RNG.
    let noise = |i: usize, j: usize| ((i * 7919 + j * 104_729) % 1000) as f64 / 1000.0 - 0.5;
    let signal = DVector::from_fn(n, |i, _| (i as f64 / n as f64 * 6.0).sin());
    let f = DMatrix::from_fn(n, m, |i, j| signal[i] + 0.2 * noise(i, j));
    let y = DVector::from_fn(n, |i, _| signal[i] + 0.5 * noise(i, m));
    let traces = DVector::from_fn(m, |j, _| 2.0 + j as f64);
    (f.transpose() * &f, f.transpose() * y - 0.25 * traces)
}
