//! Convex quadratic minimization over the probability simplex:
//! `min w' H w - 2 b' w` subject to `w >= 0`, `sum w = 1`.
//!
//! Accelerated projected gradient with adaptive restart gets close to the
//! optimum; an active-set solve on the current support then lands on it
//! exactly. The returned point is certified by the gradient-mapping residual
//! `L * ||w - proj(w - grad / L)||_inf`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvmmaError};
use crate::linalg::{max_eigenvalue, pseudo_inverse};

pub const MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const POLISH_EVERY: usize = 25;
const PINV_CUTOFF: f64 = 1e-10;

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

struct Problem {
    h: DMatrix<f64>,
    b: DVector<f64>,
    lipschitz: f64,
    tol: f64,
}

impl Problem {
    fn objective(&self, w: &DVector<f64>) -> f64 {
        (&self.h * w).dot(w) - 2.0 * self.b.dot(w)
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.h * w - &self.b)
    }

    fn project(v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(project_simplex(v.as_slice()))
    }

    fn kkt_residual(&self, w: &DVector<f64>) -> f64 {
        let g = self.gradient(w);
        let step = Self::project(&(w - &g / self.lipschitz));
        self.lipschitz * (w - step).amax()
    }

    /// Exact minimizer on faces of the simplex, starting from the support of
    /// the feasible point `start`.
    fn polish(&self, start: &DVector<f64>) -> DVector<f64> {
        let m = start.len();
        let mut x = start.clone();
        let mut support: Vec<usize> = (0..m).filter(|&i| x[i] > 0.0).collect();
        for _ in 0..(4 * m + 10) {
            let k = support.len();
            let mut kkt = DMatrix::zeros(k + 1, k + 1);
            let mut rhs = DVector::zeros(k + 1);
            for (r, &i) in support.iter().enumerate() {
                for (c, &j) in support.iter().enumerate() {
                    kkt[(r, c)] = 2.0 * self.h[(i, j)];
                }
                kkt[(r, k)] = 1.0;
                kkt[(k, r)] = 1.0;
                rhs[r] = 2.0 * self.b[i];
            }
            rhs[k] = 1.0;
            let pinv = pseudo_inverse(&kkt, PINV_CUTOFF);
            let mut sol = &pinv * &rhs;
            // One round of iterative refinement.
            sol += &pinv * (&rhs - &kkt * &sol);
            let mut target = DVector::zeros(m);
            for (r, &i) in support.iter().enumerate() {
                target[i] = sol[r];
            }

            // Walk toward the face minimizer until a coordinate hits zero.
            let mut alpha = 1.0f64;
            let mut blocking = None;
            for &i in &support {
                if target[i] < 0.0 {
                    let a = x[i] / (x[i] - target[i]);
                    if a < alpha {
                        alpha = a;
                        blocking = Some(i);
                    }
                }
            }
            if let Some(i) = blocking {
                x += alpha * (&target - &x);
                x[i] = 0.0;
                support.retain(|&j| j != i && x[j] > 0.0);
                if support.is_empty() {
                    break;
                }
                continue;
            }
            x = target;

            // Dual feasibility off the support.
            let g = self.gradient(&x);
            let lambda = -support.iter().map(|&i| g[i]).sum::<f64>() / k as f64;
            let violator = (0..m)
                .filter(|i| !support.contains(i))
                .map(|i| (i, g[i] + lambda))
                .filter(|&(_, v)| v < -self.tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match violator {
                Some((i, _)) => {
                    support.push(i);
                    support.sort_unstable();
                }
                None => break,
            }
        }
        clean(x)
    }
}

/// Clears round-off negatives and renormalizes.
fn clean(mut x: DVector<f64>) -> DVector<f64> {
    for v in x.iter_mut() {
        if *v < 0.0 || !v.is_finite() {
            *v = 0.0;
        }
    }
    let s = x.sum();
    if s > 0.0 {
        x /= s;
    } else {
        let m = x.len();
        x.fill(1.0 / m as f64);
    }
    x
}

/// Minimizes `w' H w - 2 b' w` over the simplex to gradient-mapping residual
/// at most `tol`, measured after scaling `H` and `b` by their largest
/// absolute entry.
pub fn simplex_qp(h: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let m = b.len();
    if m == 0 || h.nrows() != m || h.ncols() != m {
        return Err(SvmmaError::DimensionMismatch(format!(
            "H is {}x{}, b has length {m}",
            h.nrows(),
            h.ncols()
        )));
    }
    if !(tol > 0.0) {
        return Err(SvmmaError::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }
    if h.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(SvmmaError::NonFiniteInput("QP data".into()));
    }
    let scale = h.amax().max(b.amax());
    if (h - h.transpose()).amax() > 1e-8 * scale.max(1.0) {
        return Err(SvmmaError::InvalidArgument("H is not symmetric".into()));
    }
    if m == 1 {
        return Ok(DVector::from_element(1, 1.0));
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let hs = (h + h.transpose()) / (2.0 * scale);
    let lipschitz = 2.0 * max_eigenvalue(&hs);
    let problem = Problem {
        lipschitz: if lipschitz > 1e-12 { lipschitz } else { 1.0 },
        h: hs,
        b: b / scale,
        tol,
    };

    let mut x = DVector::from_element(m, 1.0 / m as f64);
    let mut fx = problem.objective(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = problem.kkt_residual(&x);
    let mut best = (fx, x.clone());
    for it in 0..MAX_ITERATIONS {
        if residual <= tol {
            break;
        }
        if it % POLISH_EVERY == 0 {
            let p = problem.polish(&x);
            let fp = problem.objective(&p);
            if fp <= fx {
                let rp = problem.kkt_residual(&p);
                if rp <= tol {
                    return Ok(p);
                }
            }
        }
        let g = problem.gradient(&y);
        let xn = Problem::project(&(&y - &g / problem.lipschitz));
        let fxn = problem.objective(&xn);
        if fxn > fx {
            // Adaptive restart: drop momentum and take a plain step.
            t = 1.0;
            y = x.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &xn + ((t - 1.0) / tn) * (&xn - &x);
        t = tn;
        x = xn;
        fx = fxn;
        residual = problem.kkt_residual(&x);
        if fx < best.0 {
            best = (fx, x.clone());
        }
    }
    let p = problem.polish(&best.1);
    if problem.objective(&p) <= best.0 + 1e-15 * best.0.abs() {
        let rp = problem.kkt_residual(&p);
        if rp <= tol {
            return Ok(p);
        }
        residual = residual.min(rp);
    }
    if residual <= tol {
        return Ok(clean(best.1));
    }
    Err(SvmmaError::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[1.0, 1.0, -5.0]);
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn identity_cases() {
        let h = DMatrix::identity(3, 3);
        let w = simplex_qp(&h, &DVector::from_vec(vec![1.0, 0.0, 0.0]), 1e-10).unwrap();
        assert!((w - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-12);
        let h = DMatrix::identity(2, 2);
        let w = simplex_qp(&h, &DVector::from_vec(vec![0.5, 0.5]), 1e-10).unwrap();
        assert!((w - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-12);
    }

    #[test]
    fn degenerate_face_gives_minimum_norm() {
        // Three identical candidates: every simplex point is optimal.
        let h = DMatrix::from_element(3, 3, 2.0);
        let b = DVector::from_element(3, 1.0);
        let w = simplex_qp(&h, &b, 1e-10).unwrap();
        assert!((w - DVector::from_element(3, 1.0 / 3.0)).amax() < 1e-10);
    }

    #[test]
    fn many_correlated_candidates_converge() {
        // Fitted vectors sharing a common signal: the Gram matrix spans
        // several orders of magnitude, like all-subsets candidate sets.
        use rand::{Rng, SeedableRng};
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 100;
            let m = 63;
            let signal = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0);
            let f = DMatrix::from_fn(n, m, |i, _| signal[i] + 0.3 * (rng.random::<f64>() - 0.5));
            let y = &signal + DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let h = f.transpose() * &f;
            let b = f.transpose() * &y - DVector::from_fn(m, |_, _| 5.0 * rng.random::<f64>());
            let w = simplex_qp(&h, &b, 1e-10).unwrap();
            assert!((w.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(simplex_qp(&h, &DVector::zeros(2), 1e-10).is_err());
        let h = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(
            simplex_qp(&h, &DVector::zeros(2), 1e-10),
            Err(SvmmaError::NonFiniteInput(_))
        ));
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_nearest(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // Optimality: v - p is constant on the support and no larger off it.
            let support: Vec<usize> = (0..v.len()).filter(|&i| p[i] > 0.0).collect();
            let theta = v[support[0]] - p[support[0]];
            for i in 0..v.len() {
                if p[i] > 0.0 {
                    prop_assert!((v[i] - p[i] - theta).abs() < 1e-12);
                } else {
                    prop_assert!(v[i] <= theta + 1e-12);
                }
            }
        }

        #[test]
        fn permutation_invariant(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(6, 4, |_, _| rng.random::<f64>() - 0.5);
            let h = a.transpose() * &a;
            let b = DVector::from_fn(4, |_, _| rng.random::<f64>() - 0.5);
            let w = simplex_qp(&h, &b, 1e-10).unwrap();
            let perm = [2usize, 0, 3, 1];
            let hp = DMatrix::from_fn(4, 4, |i, j| h[(perm[i], perm[j])]);
            let bp = DVector::from_fn(4, |i, _| b[perm[i]]);
            let wp = simplex_qp(&hp, &bp, 1e-10).unwrap();
            for i in 0..4 {
                prop_assert!((wp[i] - w[perm[i]]).abs() < 1e-6);
            }
        }
    }
}
