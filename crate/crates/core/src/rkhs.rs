//! Reproducing kernel for `W^{2,2}` on `[0, 1]`, Gram matrices, and
//! diagnostics driven by the kernel spectrum.
//!
//! The kernel is the rescaled Bernoulli-polynomial kernel
//! `K(x, y) = 1 + k1(x) k1(y) + k2(x) k2(y) - k4(|x - y|)` with
//! `k1(x) = x - 1/2`, `k2(x) = (k1(x)^2 - 1/12) / 2` and
//! `k4(x) = (k1(x)^4 - k1(x)^2/2 + 7/240) / 24`, i.e. the scaled Bernoulli
//! polynomials `B_nu(x) / nu!`.
//!
//! The kernel's Mercer eigenvalues have no closed form. Where a diagnostic
//! needs them (effective dimension, `Q_n`, `zeta_n`) they are estimated as
//! eigenvalues of `Gram/m` on an `m = 512` midpoint grid, truncated at
//! `1e-14` of the top eigenvalue. Callers can bypass the estimate by
//! supplying an explicit eigenvalue list.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::TimeGrid;

/// Grid size of the empirical eigenvalue estimate.
pub const EMPIRICAL_EIGEN_GRID: usize = 512;
/// Eigenvalues below this fraction of the top one are dropped.
pub const EIGEN_TRUNCATION_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// The Bernoulli-polynomial kernel above; pointwise evaluable.
    BernoulliW22,
    /// A kernel known only through its eigenvalue list; usable by the
    /// spectrum diagnostics but never evaluated pointwise.
    EigenList,
}

/// Kernel identity plus an optional (truncated) eigenvalue list.
///
/// Serializes as `{"kind": "...", "eigenvalues": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn bernoulli() -> Self {
        Self {
            kind: KernelKind::BernoulliW22,
            eigenvalues: None,
        }
    }

    pub fn eigen_list(eigenvalues: Vec<f64>) -> Result<Self> {
        let spec = Self {
            kind: KernelKind::EigenList,
            eigenvalues: Some(eigenvalues),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the eigenvalue list: non-increasing, non-negative, finite.
    /// The rescaling convention (top eigenvalue at most 1) is the caller's
    /// contract and is not enforced here; the diagnostics are documented
    /// against rescaled spectra.
    pub fn validate(&self) -> Result<()> {
        match (&self.kind, &self.eigenvalues) {
            (KernelKind::EigenList, None) => Err(Error::InvalidArgument(
                "eigen_list kernel requires an eigenvalue list".into(),
            )),
            (_, Some(eigs)) => {
                if eigs.is_empty() {
                    return Err(Error::InvalidArgument(
                        "eigenvalue list must be non-empty".into(),
                    ));
                }
                for (k, &mu) in eigs.iter().enumerate() {
                    if !mu.is_finite() || mu < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "eigenvalue {} (value {mu}) must be finite and >= 0",
                            k + 1
                        )));
                    }
                    if k > 0 && mu > eigs[k - 1] {
                        return Err(Error::InvalidArgument(format!(
                            "eigenvalues must be non-increasing (violated at index {})",
                            k + 1
                        )));
                    }
                }
                Ok(())
            }
            (KernelKind::BernoulliW22, None) => Ok(()),
        }
    }

    /// The eigenvalue list backing spectrum diagnostics: the stored list if
    /// present, otherwise the empirical estimate for the Bernoulli kernel.
    pub fn resolve_eigenvalues(&self) -> Result<Vec<f64>> {
        self.validate()?;
        match &self.eigenvalues {
            Some(eigs) => Ok(eigs.clone()),
            None => Ok(empirical_bernoulli_eigenvalues(EMPIRICAL_EIGEN_GRID)),
        }
    }
}

#[inline]
fn b1(x: f64) -> f64 {
    x - 0.5
}

#[inline]
fn b2(x: f64) -> f64 {
    let k1 = b1(x);
    (k1 * k1 - 1.0 / 12.0) / 2.0
}

#[inline]
fn b4(x: f64) -> f64 {
    let k1 = b1(x);
    let k1sq = k1 * k1;
    (k1sq * k1sq - k1sq / 2.0 + 7.0 / 240.0) / 24.0
}

#[inline]
pub(crate) fn kernel_unchecked(x: f64, y: f64) -> f64 {
    1.0 + b1(x) * b1(y) + b2(x) * b2(y) - b4((x - y).abs())
}

/// Evaluates the Bernoulli `W^{2,2}` kernel at `(x, y)`, both in `[0, 1]`.
pub fn kernel_eval(x: f64, y: f64) -> Result<f64> {
    for v in [x, y] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "kernel argument {v} is outside [0, 1]"
            )));
        }
    }
    Ok(kernel_unchecked(x, y))
}

/// The `n x n` matrix of kernel evaluations over a grid; symmetric and
/// positive semidefinite up to rounding (minimum eigenvalue at worst
/// `-1e-8 * trace / n`, pinned by tests).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    matrix: DMatrix<f64>,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn gram(grid: &TimeGrid) -> GramMatrix {
    let pts = grid.points();
    let n = pts.len();
    let mut m = DMatrix::zeros(n, n);
    for u in 0..n {
        for v in u..n {
            let k = kernel_unchecked(pts[u], pts[v]);
            m[(u, v)] = k;
            m[(v, u)] = k;
        }
    }
    GramMatrix { matrix: m }
}

/// Empirical Mercer eigenvalues of the Bernoulli kernel: eigenvalues of
/// `Gram/m` on the midpoint grid `(i + 1/2)/m`, sorted non-increasing and
/// truncated at `EIGEN_TRUNCATION_REL` of the top one.
pub fn empirical_bernoulli_eigenvalues(m: usize) -> Vec<f64> {
    assert!(m >= 2, "empirical eigenvalue grid must have at least 2 points");
    if m == EMPIRICAL_EIGEN_GRID {
        static CACHE: OnceLock<Vec<f64>> = OnceLock::new();
        return CACHE
            .get_or_init(|| empirical_bernoulli_eigenvalues_uncached(EMPIRICAL_EIGEN_GRID))
            .clone();
    }
    empirical_bernoulli_eigenvalues_uncached(m)
}

fn empirical_bernoulli_eigenvalues_uncached(m: usize) -> Vec<f64> {
    let pts: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
    let grid = TimeGrid::new(pts).expect("midpoint grid is valid");
    let scaled = gram(&grid).into_inner() / m as f64;
    let mut eigs: Vec<f64> = scaled.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    let top = eigs.first().copied().unwrap_or(0.0);
    let cutoff = EIGEN_TRUNCATION_REL * top;
    eigs.retain(|&mu| mu >= cutoff && mu > 0.0);
    eigs
}

/// Effective dimension `sum_k mu_k^2 / mu_1^2` of the kernel's RKHS.
pub fn effective_dimension(spec: &KernelSpec) -> Result<f64> {
    let eigs = spec.resolve_eigenvalues()?;
    let top = eigs.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Degenerate(
            "effective dimension undefined for an all-zero spectrum".into(),
        ));
    }
    Ok(eigs.iter().map(|&mu| (mu / top) * (mu / top)).sum())
}

fn q_from_eigenvalues(delta: f64, eigs: &[f64], n: usize) -> f64 {
    let d2 = delta * delta;
    let s: f64 = eigs.iter().map(|&mu| mu.min(d2)).sum();
    (s / n as f64).sqrt()
}

/// `Q_n(delta) = sqrt(sum_k min(delta^2, mu_k) / n)` over the stored
/// (truncated) eigenvalue list.
pub fn q_n(delta: f64, spec: &KernelSpec, n: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let eigs = spec.resolve_eigenvalues()?;
    Ok(q_from_eigenvalues(delta, &eigs, n))
}

/// The dyadic check lattice `{2^-m : m = 0..=40}` on which the `zeta_n`
/// defining inequality is enforced.
fn zeta_lattice() -> Vec<f64> {
    (0..=40).map(|m| 0.5f64.powi(m)).collect()
}

fn zeta_satisfies(zeta: f64, eigs: &[f64], n: usize, lattice: &[f64]) -> bool {
    lattice
        .iter()
        .all(|&d| q_from_eigenvalues(d, eigs, n) <= zeta * d + zeta * zeta)
}

/// Smallest `zeta >= sqrt(log n / n)` with
/// `Q_n(delta) <= zeta*delta + zeta^2` on the dyadic check lattice,
/// located by bisection to absolute tolerance `1e-10`.
pub fn zeta_n(spec: &KernelSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "zeta_n requires n >= 2, got {n}"
        )));
    }
    let eigs = spec.resolve_eigenvalues()?;
    let lattice = zeta_lattice();
    let floor = ((n as f64).ln() / n as f64).sqrt();
    if zeta_satisfies(floor, &eigs, n, &lattice) {
        return Ok(floor);
    }
    let mut hi = floor.max(1.0).max(q_from_eigenvalues(1.0, &eigs, n));
    while !zeta_satisfies(hi, &eigs, n, &lattice) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numeric(
                "zeta_n bisection failed to bracket a feasible value".into(),
            ));
        }
    }
    let mut lo = floor;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if zeta_satisfies(mid, &eigs, n, &lattice) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
