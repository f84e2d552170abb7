//! Seeded synthetic data: cosine-basis singular functions, uniform-sphere
//! singular vectors, unit-norm functional remainder draws, uniform random
//! grids, and Gaussian observation noise.
//!
//! Randomness comes from ChaCha8, a counter-based generator with explicit
//! stream splitting: one substream per role (singular vectors, singular
//! functions, remainder, grid, noise), so changing e.g. the noise level
//! never reshuffles the draws of any other role.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::function::midpoints;
use crate::metrics::ScoredComponent;
use crate::tensor::{Tensor3, TimeGrid};

const STREAM_VECTORS: u64 = 0;
const STREAM_FUNCTIONS: u64 = 1;
const STREAM_REMAINDER: u64 = 2;
const STREAM_GRID: u64 = 3;
const STREAM_NOISE: u64 = 4;

fn stream(seed: u64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(role);
    rng
}

/// Simulation protocol parameters. `lambda_min` scales the planted singular
/// values as `lambda_l = lambda_min * (r - l + 1)`; zero is allowed and
/// yields a pure-noise tensor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
    pub r: usize,
    pub lambda_min: f64,
    /// Amplitude of the functional remainder.
    pub sigma: f64,
    /// Standard deviation of the entrywise observation noise.
    pub tau: f64,
    pub seed: u64,
    pub n_basis: usize,
}

impl SimConfig {
    pub fn new(p1: usize, p2: usize, n: usize, r: usize) -> Self {
        Self {
            p1,
            p2,
            n,
            r,
            lambda_min: 1.0,
            sigma: 0.0,
            tau: 0.0,
            seed: 0,
            n_basis: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 == 0 || self.p2 == 0 || self.n == 0 {
            return Err(Error::InvalidArgument(
                "simulation dimensions must all be >= 1".into(),
            ));
        }
        if self.r == 0 || self.r > self.p1.min(self.p2) {
            return Err(Error::InvalidArgument(format!(
                "rank must lie in 1..=min(p1, p2), got {}",
                self.r
            )));
        }
        if !(self.lambda_min >= 0.0 && self.lambda_min.is_finite()) {
            return Err(Error::InvalidArgument("lambda_min must be >= 0".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument("sigma must be >= 0".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument("tau must be >= 0".into()));
        }
        if self.n_basis == 0 {
            return Err(Error::InvalidArgument("n_basis must be >= 1".into()));
        }
        Ok(())
    }
}

/// Orthonormal cosine basis: `u_1 = 1`, `u_i(s) = sqrt(2) cos((i-1) pi s)`.
pub fn basis_eval(i: usize, n_basis: usize, s: f64) -> Result<f64> {
    if i == 0 || i > n_basis {
        return Err(Error::InvalidArgument(format!(
            "basis index must lie in 1..={n_basis}, got {i}"
        )));
    }
    if !s.is_finite() || !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "basis argument {s} is outside [0, 1]"
        )));
    }
    Ok(basis_unchecked(i, s))
}

#[inline]
fn basis_unchecked(i: usize, s: f64) -> f64 {
    if i == 1 {
        1.0
    } else {
        2f64.sqrt() * ((i - 1) as f64 * std::f64::consts::PI * s).cos()
    }
}

/// One planted component; `xi_coeffs` are unit-L2 coordinates on the cosine
/// basis (the basis is orthonormal, so the L2 norm is the Euclidean norm of
/// the coefficients).
#[derive(Debug, Clone)]
pub struct TruthComponent {
    pub lambda: f64,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub xi_coeffs: Vec<f64>,
}

/// Planted components plus the basis coefficients of every remainder
/// function `Z_{ij.}` (row-major over `(i, j)`).
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub p1: usize,
    pub p2: usize,
    pub n_basis: usize,
    pub components: Vec<TruthComponent>,
    pub remainder_coeffs: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn xi_values(&self, l: usize, points: &[f64]) -> Vec<f64> {
        let coeffs = &self.components[l].xi_coeffs;
        points
            .iter()
            .map(|&s| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(c, &x)| x * basis_unchecked(c + 1, s))
                    .sum()
            })
            .collect()
    }

    pub fn remainder_values(&self, i: usize, j: usize, points: &[f64]) -> Vec<f64> {
        let coeffs = &self.remainder_coeffs[i * self.p2 + j];
        points
            .iter()
            .map(|&s| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(c, &x)| x * basis_unchecked(c + 1, s))
                    .sum()
            })
            .collect()
    }

    /// The raw (unscaled) remainder tensor evaluated at the given points;
    /// used to refine the grid proxy of the remainder sup-norm diagnostic.
    pub fn remainder_on_grid(&self, points: &[f64]) -> Result<Tensor3> {
        let n = points.len();
        let basis = basis_matrix(self.n_basis, points);
        Tensor3::from_fn(self.p1, self.p2, n, |i, j, k| {
            let coeffs = &self.remainder_coeffs[i * self.p2 + j];
            coeffs
                .iter()
                .enumerate()
                .map(|(c, &x)| x * basis[c][k])
                .sum()
        })
    }

    /// The noiseless signal tensor evaluated at the given points.
    pub fn signal_on_grid(&self, points: &[f64]) -> Result<Tensor3> {
        let n = points.len();
        let xi: Vec<Vec<f64>> = (0..self.components.len())
            .map(|l| self.xi_values(l, points))
            .collect();
        Tensor3::from_fn(self.p1, self.p2, n, |i, j, k| {
            self.components
                .iter()
                .enumerate()
                .map(|(l, comp)| comp.lambda * comp.a[i] * comp.b[j] * xi[l][k])
                .sum()
        })
    }

    /// Components in the form the evaluation metrics consume.
    pub fn sampled_components(&self, quad_m: usize) -> Vec<ScoredComponent> {
        let pts = midpoints(quad_m);
        self.components
            .iter()
            .enumerate()
            .map(|(l, comp)| ScoredComponent {
                a: comp.a.clone(),
                b: comp.b.clone(),
                xi: self.xi_values(l, &pts),
            })
            .collect()
    }
}

fn basis_matrix(n_basis: usize, points: &[f64]) -> Vec<Vec<f64>> {
    (1..=n_basis)
        .map(|c| points.iter().map(|&s| basis_unchecked(c, s)).collect())
        .collect()
}

fn unit_sphere(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
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

/// Draws `x_c ~ Unif[-1/c, 1/c]` and normalizes to a unit-L2 function on the
/// orthonormal basis (Euclidean normalization of the coefficients).
fn unit_basis_coeffs(n_basis: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut coeffs: Vec<f64> = (1..=n_basis)
            .map(|c| {
                let bound = 1.0 / c as f64;
                Uniform::new(-bound, bound)
                    .expect("valid uniform bounds")
                    .sample(rng)
            })
            .collect();
        let norm = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut coeffs {
                *x /= norm;
            }
            return coeffs;
        }
    }
}

/// Draws the planted components and remainder coefficients; bitwise
/// reproducible for a fixed `cfg.seed`.
pub fn gen_truth(cfg: &SimConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut rng_vectors = stream(cfg.seed, STREAM_VECTORS);
    let mut rng_functions = stream(cfg.seed, STREAM_FUNCTIONS);
    let mut rng_remainder = stream(cfg.seed, STREAM_REMAINDER);

    let components = (0..cfg.r)
        .map(|l| {
            let a = unit_sphere(cfg.p1, &mut rng_vectors);
            let b = unit_sphere(cfg.p2, &mut rng_vectors);
            let xi_coeffs = unit_basis_coeffs(cfg.n_basis, &mut rng_functions);
            TruthComponent {
                lambda: cfg.lambda_min * (cfg.r - l) as f64,
                a,
                b,
                xi_coeffs,
            }
        })
        .collect();

    let remainder_coeffs = (0..cfg.p1 * cfg.p2)
        .map(|_| unit_basis_coeffs(cfg.n_basis, &mut rng_remainder))
        .collect();

    Ok(GroundTruth {
        p1: cfg.p1,
        p2: cfg.p2,
        n_basis: cfg.n_basis,
        components,
        remainder_coeffs,
    })
}

/// Samples the observation tensor on a fresh sorted uniform grid:
/// `Y_ijk = X_ij(s_k) + sigma Z_ij(s_k) + tau N(0, 1)`.
pub fn gen_dataset(cfg: &SimConfig, truth: &GroundTruth) -> Result<(Tensor3, TimeGrid)> {
    cfg.validate()?;
    if truth.p1 != cfg.p1 || truth.p2 != cfg.p2 || truth.components.len() != cfg.r {
        return Err(Error::DimensionMismatch(
            "ground truth does not match the simulation config".into(),
        ));
    }
    let mut rng_grid = stream(cfg.seed, STREAM_GRID);
    let draws: Vec<f64> = (0..cfg.n).map(|_| rng_grid.random::<f64>()).collect();
    let grid = TimeGrid::new(draws)?;

    let basis = basis_matrix(cfg.n_basis, grid.points());
    let xi_on_grid: Vec<Vec<f64>> = truth
        .components
        .iter()
        .map(|c| {
            (0..cfg.n)
                .map(|k| {
                    c.xi_coeffs
                        .iter()
                        .enumerate()
                        .map(|(ci, &x)| x * basis[ci][k])
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut rng_noise = stream(cfg.seed, STREAM_NOISE);
    let mut data = Vec::with_capacity(cfg.p1 * cfg.p2 * cfg.n);
    for k in 0..cfg.n {
        for i in 0..cfg.p1 {
            for j in 0..cfg.p2 {
                let mut value = 0.0;
                for (l, comp) in truth.components.iter().enumerate() {
                    value += comp.lambda * comp.a[i] * comp.b[j] * xi_on_grid[l][k];
                }
                if cfg.sigma > 0.0 {
                    let coeffs = &truth.remainder_coeffs[i * cfg.p2 + j];
                    let z: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(c, &x)| x * basis[c][k])
                        .sum();
                    value += cfg.sigma * z;
                }
                if cfg.tau > 0.0 {
                    let eps: f64 = StandardNormal.sample(&mut rng_noise);
                    value += cfg.tau * eps;
                }
                data.push(value);
            }
        }
    }
    Ok((Tensor3::new(cfg.p1, cfg.p2, cfg.n, data)?, grid))
}
