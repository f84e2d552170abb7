//! Functional tensor SVD.
//!
//! Estimates CP-style singular components `(lambda, a, b, xi)` of a dense
//! order-3 tensor whose first two modes are tabular and whose third mode is a
//! function of time observed on a discrete grid in `[0, 1]`. The singular
//! vectors are recovered by power iteration; the singular function is
//! re-estimated at every step by a kernel ridge fit in the Sobolev space
//! `W^{2,2}`, which is what separates this estimator from plain tabular CP.
//!
//! Module map:
//! - [`tensor`]: dense tensor storage, matricizations, mode contractions,
//!   rank-1 arithmetic and residual norms.
//! - [`rkhs`]: the reproducing kernel, Gram matrices, and spectrum
//!   diagnostics (effective dimension, `Q_n`, `zeta_n`).
//! - [`function`]: kernel-ridge function fits, evaluation, quadrature norms.
//! - [`ftsvd`]: spectral initialization, regularized power iteration,
//!   sequential deflation, BIC rank selection.
//! - [`baselines`]: tabular CP power iteration with random restarts and
//!   minimal-H-norm interpolation.
//! - [`simulate`]: seeded synthetic data generation.
//! - [`metrics`]: sine distances, component matching, remainder diagnostics,
//!   trajectory aggregation.
//! - [`ingest`]: count-data log-composition transform.
//! - [`io`]: CSV/JSON readers and writers for every on-disk format.

pub mod baselines;
pub mod error;
pub mod ftsvd;
pub mod function;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod rkhs;
pub mod simulate;
pub mod tensor;

pub use error::{Error, Result};
pub use ftsvd::{Component, Decomposition, FitConfig};
pub use function::RkhsFunction;
pub use rkhs::KernelSpec;
pub use tensor::{Tensor3, TimeGrid};
