//! Tabular CP power iteration with random restarts, plus minimal-H-norm
//! interpolation to lift its discrete mode-3 loading to a function.
//!
//! The iteration mirrors the main estimator step for step, with the ridge
//! function update replaced by a normalized mode-3 product. Restarts are
//! drawn up front from a seeded stream; the winner is the start maximizing
//! the absolute triple contraction, ties broken by the lowest start index,
//! so results are bitwise reproducible for a fixed seed.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::function::RkhsFunction;
use crate::rkhs;
use crate::tensor::{Tensor3, TimeGrid};

pub const DEFAULT_N_INIT: usize = 20;
pub const DEFAULT_JITTER: f64 = 1e-10;

/// One tabular CP component; `v` is the discrete unit mode-3 loading.
#[derive(Debug, Clone)]
pub struct CpComponent {
    pub lambda: f64,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub v: DVector<f64>,
}

fn sign_fix(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        }));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// One power-iteration run from a fixed start; `None` when an update
/// vanishes.
fn cp_run(
    y: &Tensor3,
    a0: &DVector<f64>,
    b0: &DVector<f64>,
    t_iters: usize,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let normalize = |u: DVector<f64>| -> Option<DVector<f64>> {
        let norm = u.norm();
        if norm < 1e-12 {
            return None;
        }
        let mut out = u / norm;
        sign_fix(&mut out);
        Some(out)
    };
    let mut a = a0.clone();
    let mut b = b0.clone();
    let mut v = normalize(y.contract12(&a, &b).ok()?)?;
    for _ in 0..t_iters {
        let a_next = normalize(y.contract23(&b, &v).ok()?)?;
        let b_next = normalize(y.contract13(&a, &v).ok()?)?;
        let v_next = normalize(y.contract12(&a_next, &b_next).ok()?)?;
        a = a_next;
        b = b_next;
        v = v_next;
    }
    Some((a, b, v))
}

/// Classic rank-1 tabular power iteration, deflated `r` times. Each
/// component runs `n_init` random `(a0, b0)` starts on the current residual
/// and keeps the run maximizing `|Y x1 a x2 b x3 v|`.
pub fn cp_decompose(
    y: &Tensor3,
    r: usize,
    n_init: usize,
    t_iters: usize,
    seed: u64,
) -> Result<Vec<CpComponent>> {
    let (p1, p2, _) = y.dims();
    if r == 0 || r > p1.min(p2) {
        return Err(Error::InvalidArgument(format!(
            "rank must lie in 1..=min(p1, p2), got {r}"
        )));
    }
    if n_init == 0 || t_iters == 0 {
        return Err(Error::InvalidArgument(
            "n_init and t_iters must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual = y.clone();
    let mut components = Vec::with_capacity(r);
    for l in 0..r {
        // Draw every start first so the stream layout is independent of
        // which runs fail.
        let starts: Vec<(DVector<f64>, DVector<f64>)> = (0..n_init)
            .map(|_| (random_unit(p1, &mut rng), random_unit(p2, &mut rng)))
            .collect();
        let mut best: Option<(f64, (DVector<f64>, DVector<f64>, DVector<f64>))> = None;
        for (a0, b0) in &starts {
            let Some(run) = cp_run(&residual, a0, b0, t_iters) else {
                continue;
            };
            let objective = residual
                .contract_all(&run.0, &run.1, &run.2)?
                .abs();
            let better = match &best {
                None => true,
                Some((best_objective, _)) => objective > *best_objective,
            };
            if better {
                best = Some((objective, run));
            }
        }
        let Some((_, (mut a, b, v))) = best else {
            return Err(Error::Degenerate(format!(
                "every restart vanished while extracting component {}",
                l + 1
            )));
        };
        // v is unit, so the projection coefficient is the plain contraction.
        let mut lambda = residual.contract_all(&a, &b, &v)? / v.norm_squared();
        if lambda < 0.0 {
            lambda = -lambda;
            a.neg_mut();
        }
        residual = residual.subtract_rank1(lambda, &a, &b, &v)?;
        components.push(CpComponent { lambda, a, b, v });
    }
    Ok(components)
}

/// Minimal-H-norm interpolation of discrete values on a grid:
/// `beta = (K + jitter I)^{-1} values`. The jitter keeps near-singular Gram
/// matrices on close-spaced grids solvable.
pub fn interpolate_min_hnorm(
    values: &DVector<f64>,
    grid: &TimeGrid,
    jitter: f64,
) -> Result<RkhsFunction> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a grid of {} points",
            values.len(),
            grid.len()
        )));
    }
    if !(jitter > 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidArgument("jitter must be positive".into()));
    }
    let n = grid.len();
    let mut k = rkhs::gram(grid).into_inner();
    for d in 0..n {
        k[(d, d)] += jitter;
    }
    let chol = nalgebra::Cholesky::new(k)
        .ok_or_else(|| Error::Numeric("interpolation solve failed".into()))?;
    let beta = chol.solve(values);
    RkhsFunction::new(grid.clone(), beta, rkhs::KernelSpec::bernoulli())
}
