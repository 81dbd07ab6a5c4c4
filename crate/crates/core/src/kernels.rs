//! Radial kernels, `L_q` distances and the diagonal spatial weights of the
//! local weighted least-squares problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvmmaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `(2 pi)^-1 exp(-r^2 / 2)`.
    Gaussian,
    /// `(1 - r^2)^2` on `[0, 1]`, zero outside.
    Bisquare,
}

impl KernelKind {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.5 * r * r).exp() / (2.0 * PI),
            KernelKind::Bisquare => {
                if r.abs() <= 1.0 {
                    let u = 1.0 - r * r;
                    u * u
                } else {
                    0.0
                }
            }
        }
    }

    pub fn has_compact_support(self) -> bool {
        matches!(self, KernelKind::Bisquare)
    }
}

impl std::str::FromStr for KernelKind {
    type Err = SvmmaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "bisquare" => Ok(Self::Bisquare),
            other => Err(SvmmaError::InvalidArgument(format!(
                "unknown kernel `{other}`"
            ))),
        }
    }
}

/// A kernel profile times a positive constant. Local-constant estimates do
/// not depend on the constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Kernel {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            kind: self.kind,
            scale: self.scale * c,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.scale * self.kind.eval(r)
    }

    /// `K(d / h) / h^2`.
    pub fn scaled_at(&self, h: f64, d: f64) -> f64 {
        self.eval(d / h) / (h * h)
    }
}

impl From<KernelKind> for Kernel {
    fn from(kind: KernelKind) -> Self {
        Self::new(kind)
    }
}

/// Order `q >= 1` of the `L_q` distance. `f64::INFINITY` gives the max norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceSpec(f64);

impl DistanceSpec {
    pub const EUCLIDEAN: DistanceSpec = DistanceSpec(2.0);
    pub const MANHATTAN: DistanceSpec = DistanceSpec(1.0);

    pub fn new(q: f64) -> Result<Self> {
        if q >= 1.0 {
            Ok(Self(q))
        } else {
            Err(SvmmaError::InvalidArgument(format!(
                "distance order q = {q} must be >= 1"
            )))
        }
    }

    pub fn q(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn eval(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let dx = (a[0] - b[0]).abs();
        let dy = (a[1] - b[1]).abs();
        let q = self.0;
        if q == 2.0 {
            dx.hypot(dy)
        } else if q == 1.0 {
            dx + dy
        } else if q.is_infinite() {
            dx.max(dy)
        } else {
            (dx.powf(q) + dy.powf(q)).powf(1.0 / q)
        }
    }
}

impl Default for DistanceSpec {
    fn default() -> Self {
        Self::EUCLIDEAN
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2], q: f64) -> Result<f64> {
    Ok(DistanceSpec::new(q)?.eval(a, b))
}

pub fn kernel_eval(kind: KernelKind, r: f64) -> f64 {
    kind.eval(r)
}

pub fn scaled_kernel(kernel: impl Into<Kernel>, h: f64, d: f64) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(kernel.into().scaled_at(h, d))
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(SvmmaError::InvalidArgument(format!(
            "bandwidth {h} must be positive and finite"
        )))
    }
}

/// Diagonal of the spatial weight matrix at target location `s`.
pub fn weight_diagonal(
    locations: &[[f64; 2]],
    s: [f64; 2],
    kernel: impl Into<Kernel>,
    h: f64,
    distance: DistanceSpec,
) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let kernel = kernel.into();
    Ok(locations
        .iter()
        .map(|&si| kernel.scaled_at(h, distance.eval(si, s)))
        .collect())
}

/// Dense pairwise distance matrix, reused across a bandwidth search.
#[derive(Debug, Clone)]
pub struct DistanceCache {
    n: usize,
    values: Vec<f64>,
}

impl DistanceCache {
    pub fn new(locations: &[[f64; 2]], distance: DistanceSpec) -> Self {
        let n = locations.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance.eval(locations[i], locations[j]);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Self { n, values }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Largest pairwise distance between locations.
pub fn max_extent(locations: &[[f64; 2]], distance: DistanceSpec) -> f64 {
    let mut best = 0.0f64;
    for (i, &a) in locations.iter().enumerate() {
        for &b in &locations[i + 1..] {
            best = best.max(distance.eval(a, b));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distances() {
        assert_eq!(distance([0.0, 0.0], [3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(distance([0.0, 0.0], [3.0, 4.0], 1.0).unwrap(), 7.0);
        assert_eq!(distance([1.5, -2.0], [1.5, -2.0], 3.0).unwrap(), 0.0);
        assert!(distance([0.0, 0.0], [1.0, 1.0], 0.5).is_err());
        let d3 = distance([0.0, 0.0], [1.0, 1.0], 3.0).unwrap();
        assert!((d3 - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(KernelKind::Bisquare, 0.0), 1.0);
        assert_eq!(kernel_eval(KernelKind::Bisquare, 0.5), 0.5625);
        assert_eq!(kernel_eval(KernelKind::Bisquare, 1.0), 0.0);
        assert_eq!(kernel_eval(KernelKind::Bisquare, 1.5), 0.0);
        let g0 = kernel_eval(KernelKind::Gaussian, 0.0);
        assert!((g0 - 0.159_154_943_091_895_34).abs() < 1e-15);
    }

    #[test]
    fn scaled_kernel_values() {
        assert_eq!(
            scaled_kernel(KernelKind::Bisquare, 2.0, 1.0).unwrap(),
            0.140625
        );
        assert_eq!(scaled_kernel(KernelKind::Bisquare, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(
            scaled_kernel(KernelKind::Gaussian, 1.0, 0.0).unwrap(),
            1.0 / (2.0 * PI)
        );
        assert!(scaled_kernel(KernelKind::Gaussian, 0.0, 1.0).is_err());
        assert!(scaled_kernel(KernelKind::Gaussian, -1.0, 1.0).is_err());
    }

    #[test]
    fn weight_diagonal_cases() {
        let locs = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]];
        let w = weight_diagonal(
            &locs,
            locs[0],
            KernelKind::Gaussian,
            1.0,
            DistanceSpec::EUCLIDEAN,
        )
        .unwrap();
        assert!(w.iter().all(|&v| v <= w[0]));

        let w = weight_diagonal(
            &locs,
            locs[1],
            KernelKind::Bisquare,
            0.5,
            DistanceSpec::EUCLIDEAN,
        )
        .unwrap();
        assert_eq!(w.iter().filter(|&&v| v > 0.0).count(), 1);
        assert!(w[1] > 0.0);

        let same = vec![[0.3, 0.3]; 5];
        let w = weight_diagonal(
            &same,
            [1.0, 2.0],
            KernelKind::Gaussian,
            0.7,
            DistanceSpec::EUCLIDEAN,
        )
        .unwrap();
        assert!(w.iter().all(|&v| v == w[0]));
    }

    #[test]
    fn scaling_kernel_scales_weights_exactly() {
        let locs: Vec<[f64; 2]> = (0..20).map(|i| [i as f64 * 0.1, (i % 3) as f64]).collect();
        for kind in [KernelKind::Gaussian, KernelKind::Bisquare] {
            let base =
                weight_diagonal(&locs, [0.4, 1.0], kind, 0.8, DistanceSpec::EUCLIDEAN).unwrap();
            for c in [0.5, 2.0, 4.0] {
                let scaled = weight_diagonal(
                    &locs,
                    [0.4, 1.0],
                    Kernel::new(kind).scaled(c),
                    0.8,
                    DistanceSpec::EUCLIDEAN,
                )
                .unwrap();
                for (a, b) in base.iter().zip(&scaled) {
                    assert_eq!(a * c, *b);
                }
            }
        }
    }

    #[test]
    fn distance_cache_matches() {
        let locs = vec![[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]];
        let cache = DistanceCache::new(&locs, DistanceSpec::MANHATTAN);
        assert_eq!(cache.row(1)[2], 3.5);
        assert_eq!(cache.row(2)[1], 3.5);
        assert_eq!(cache.max(), max_extent(&locs, DistanceSpec::MANHATTAN));
    }

    proptest! {
        #[test]
        fn kernels_nonnegative_and_nonincreasing(r1 in 0.0f64..5.0, r2 in 0.0f64..5.0) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            for kind in [KernelKind::Gaussian, KernelKind::Bisquare] {
                prop_assert!(kind.eval(lo) >= 0.0);
                prop_assert!(kind.eval(lo) >= kind.eval(hi));
            }
        }

        #[test]
        fn triangle_inequality(
            a in prop::array::uniform2(-10.0f64..10.0),
            b in prop::array::uniform2(-10.0f64..10.0),
            c in prop::array::uniform2(-10.0f64..10.0),
            q in 1.0f64..6.0,
        ) {
            let d = DistanceSpec::new(q).unwrap();
            prop_assert!(d.eval(a, c) <= d.eval(a, b) + d.eval(b, c) + 1e-12);
            prop_assert_eq!(d.eval(a, b), d.eval(b, a));
        }
    }
}
