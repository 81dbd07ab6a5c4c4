//! Small dense kernels used by the local fits.
//!
//! Local normal equations are at most a few dozen columns wide and are solved
//! once per location per bandwidth, so they work on flat row-major buffers
//! rather than allocating `nalgebra` matrices in the inner loop.

use nalgebra::DMatrix;

/// Relative pivot threshold below which a local system is declared singular.
pub const PIVOT_RATIO: f64 = 1e-12;

/// In-place Cholesky factorization of a dense `dim x dim` symmetric matrix
/// stored row-major. Only the lower triangle is read and overwritten.
///
/// Returns `false` when a pivot is nonpositive or falls below
/// `PIVOT_RATIO` times the largest pivot seen.
pub fn cholesky_in_place(a: &mut [f64], dim: usize) -> bool {
    debug_assert_eq!(a.len(), dim * dim);
    let mut max_pivot = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            let l = a[j * dim + k];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        max_pivot = max_pivot.max(d);
        min_pivot = min_pivot.min(d);
        let ljj = d.sqrt();
        a[j * dim + j] = ljj;
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= a[i * dim + k] * a[j * dim + k];
            }
            a[i * dim + j] = s / ljj;
        }
    }
    // The pivot ratio is only meaningful once every pivot is known.
    dim == 0 || min_pivot >= PIVOT_RATIO * max_pivot
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], dim: usize, b: &mut [f64]) {
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * dim + k] * b[k];
        }
        b[i] = s / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut s = b[i];
        for k in (i + 1)..dim {
            s -= l[k * dim + i] * b[k];
        }
        b[i] = s / l[i * dim + i];
    }
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, with eigenvalues
/// below `rel_cutoff * max |lambda|` in magnitude treated as zero.
///
/// nalgebra's general SVD loses several digits on small indefinite systems,
/// so this goes through the symmetric eigendecomposition instead.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let eps = (rel_cutoff * lmax).max(f64::MIN_POSITIVE);
    let inv = eig
        .eigenvalues
        .map(|l| if l.abs() > eps { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}
