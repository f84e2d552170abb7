//! Kernel-expansion functions and the ridge update of the singular function.
//!
//! A fitted function is `f(t) = sum_k beta_k K(t, s_k)` anchored at the
//! observation grid. The weighted-mean update solves
//! `(K + C_lambda I) beta = M3(Y) (a (x) b)` once per iteration through a
//! Cholesky factorization that [`RidgeSolver`] caches per `(grid, C_lambda)`.
//!
//! L2 norms and inner products use composite midpoint quadrature on `[0, 1]`
//! (`quad_m` uniform subintervals, default 1024); the quadrature grid is
//! shared by every consumer through [`midpoints`].

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};
use crate::rkhs::{self, KernelKind, KernelSpec};
use crate::tensor::{Tensor3, TimeGrid};

/// Default number of midpoint-quadrature subintervals.
pub const DEFAULT_QUAD_M: usize = 1024;

/// Norms below this are treated as a vanished function.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Midpoints `(i + 1/2)/m` of `m` uniform subintervals of `[0, 1]`.
pub fn midpoints(m: usize) -> Vec<f64> {
    (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect()
}

/// A function `f = sum_k beta_k K(., s_k)` in the Bernoulli `W^{2,2}` RKHS.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsFunction {
    grid: TimeGrid,
    beta: DVector<f64>,
    spec: KernelSpec,
}

impl RkhsFunction {
    pub fn new(grid: TimeGrid, beta: DVector<f64>, spec: KernelSpec) -> Result<Self> {
        if grid.len() != beta.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} points but beta has {} coefficients",
                grid.len(),
                beta.len()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "beta coefficients must be finite".into(),
            ));
        }
        if spec.kind != KernelKind::BernoulliW22 {
            return Err(Error::InvalidArgument(
                "kernel-expansion functions require a pointwise-evaluable kernel".into(),
            ));
        }
        Ok(Self { grid, beta, spec })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    #[inline]
    fn eval_unchecked(&self, t: f64) -> f64 {
        self.grid
            .points()
            .iter()
            .zip(self.beta.iter())
            .map(|(&s, &b)| b * rkhs::kernel_unchecked(t, s))
            .sum()
    }

    pub fn evaluate_one(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "evaluation point {t} is outside [0, 1]"
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    pub fn evaluate(&self, points: &[f64]) -> Result<Vec<f64>> {
        points.iter().map(|&t| self.evaluate_one(t)).collect()
    }

    /// `f_n = (f(s_1), ..., f(s_n))` on an arbitrary grid.
    pub fn discretize(&self, grid: &TimeGrid) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.evaluate(grid.points())?))
    }

    /// Samples on the shared midpoint quadrature grid.
    pub fn quad_samples(&self, quad_m: usize) -> Vec<f64> {
        midpoints(quad_m)
            .iter()
            .map(|&t| self.eval_unchecked(t))
            .collect()
    }

    /// Midpoint-quadrature L2 norm; `quad_m` must be >= 2.
    pub fn l2_norm(&self, quad_m: usize) -> f64 {
        debug_assert!(quad_m >= 2);
        let s: f64 = self
            .quad_samples(quad_m)
            .iter()
            .map(|v| v * v)
            .sum();
        (s / quad_m as f64).sqrt()
    }

    /// `||f||_H^2 = beta' K beta`, clamped at zero against rounding.
    pub fn h_norm_sq(&self) -> f64 {
        let k = rkhs::gram(&self.grid).into_inner();
        let q = self.beta.dot(&(&k * &self.beta));
        q.max(0.0)
    }

    /// Rescales to unit L2 norm and fixes the sign: the quadrature integral
    /// is made non-negative; if it is below `1e-10` in magnitude, the
    /// largest-magnitude beta coefficient is made positive instead.
    /// Returns the unit function together with the original norm.
    pub fn normalize(&self, quad_m: usize) -> Result<(RkhsFunction, f64)> {
        let norm = self.l2_norm(quad_m);
        if norm <= DEGENERATE_NORM {
            return Err(Error::Degenerate(
                "cannot normalize a function with vanishing L2 norm".into(),
            ));
        }
        let mut beta = &self.beta / norm;
        let integral: f64 =
            self.quad_samples(quad_m).iter().sum::<f64>() / (quad_m as f64 * norm);
        let flip = if integral.abs() >= 1e-10 {
            integral < 0.0
        } else {
            let mut best = 0;
            for i in 1..beta.len() {
                if beta[i].abs() > beta[best].abs() {
                    best = i;
                }
            }
            beta[best] < 0.0
        };
        if flip {
            beta.neg_mut();
        }
        let unit = RkhsFunction {
            grid: self.grid.clone(),
            beta,
            spec: self.spec.clone(),
        };
        Ok((unit, norm))
    }

    pub fn scaled(&self, c: f64) -> RkhsFunction {
        RkhsFunction {
            grid: self.grid.clone(),
            beta: &self.beta * c,
            spec: self.spec.clone(),
        }
    }
}

/// Cached Cholesky factorization of `K + C_lambda I` for one grid; immutable
/// and shareable across threads.
pub struct RidgeSolver {
    grid: TimeGrid,
    chol: Cholesky<f64, Dyn>,
    c_lambda: f64,
}

impl RidgeSolver {
    pub fn new(grid: &TimeGrid, c_lambda: f64) -> Result<Self> {
        if !(c_lambda > 0.0 && c_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ridge parameter must be positive, got {c_lambda}"
            )));
        }
        let n = grid.len();
        let mut m = rkhs::gram(grid).into_inner();
        for d in 0..n {
            m[(d, d)] += c_lambda;
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::Numeric("Cholesky factorization of K + C_lambda I failed".into())
        })?;
        Ok(Self {
            grid: grid.clone(),
            chol,
            c_lambda,
        })
    }

    pub fn c_lambda(&self) -> f64 {
        self.c_lambda
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Solves `(K + C_lambda I) beta = rhs` for an arbitrary right-hand side.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, grid has {}",
                rhs.len(),
                self.grid.len()
            )));
        }
        Ok(self.chol.solve(rhs))
    }

    /// The weighted-mean function update: `beta = (K + C_lambda I)^{-1}
    /// M3(Y) (a (x) b)` for unit vectors `a`, `b`.
    pub fn fit(&self, y: &Tensor3, a: &DVector<f64>, b: &DVector<f64>) -> Result<RkhsFunction> {
        if y.n() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "tensor has {} grid slices, solver grid has {}",
                y.n(),
                self.grid.len()
            )));
        }
        for (name, v, dim) in [("a", a, y.p1()), ("b", b, y.p2())] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if (v.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a unit vector (norm {})",
                    v.norm()
                )));
            }
        }
        let rhs = y.contract12(a, b)?;
        let beta = self.chol.solve(&rhs);
        RkhsFunction::new(self.grid.clone(), beta, KernelSpec::bernoulli())
    }
}

/// One-shot convenience wrapper around [`RidgeSolver`].
pub fn fit_weighted_mean(
    y: &Tensor3,
    a: &DVector<f64>,
    b: &DVector<f64>,
    grid: &TimeGrid,
    c_lambda: f64,
) -> Result<RkhsFunction> {
    RidgeSolver::new(grid, c_lambda)?.fit(y, a, b)
}
