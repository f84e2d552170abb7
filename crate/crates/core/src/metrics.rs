//! Sine distances, component matching, remainder diagnostics, and trajectory
//! aggregation.
//!
//! The sine distance `sqrt(1 - cos^2)` is invariant to sign and scale, which
//! is exactly the identifiability class of singular vectors and functions.
//! Function distances use the shared midpoint quadrature grid from
//! [`crate::function::midpoints`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::RkhsFunction;
use crate::tensor::Tensor3;

/// Sine distance between two non-zero vectors, clamped to `[0, 1]`.
pub fn dist_vec(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu <= 0.0 || nv <= 0.0 {
        return Err(Error::InvalidArgument(
            "sine distance of a zero vector is undefined".into(),
        ));
    }
    let cos = u.dot(v) / (nu * nv);
    Ok((1.0 - (cos * cos).min(1.0)).max(0.0).sqrt())
}

/// Sine distance between two functions sampled on the same quadrature grid.
pub fn dist_samples(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "sample vectors of length {} and {}",
            f.len(),
            g.len()
        )));
    }
    if f.is_empty() {
        return Err(Error::InvalidArgument("empty sample vectors".into()));
    }
    let m = f.len() as f64;
    let nf = (f.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
    let ng = (g.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
    if nf <= 1e-12 || ng <= 1e-12 {
        return Err(Error::Degenerate(
            "sine distance of a near-zero function is undefined".into(),
        ));
    }
    let inner: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / m;
    let cos = inner / (nf * ng);
    Ok((1.0 - (cos * cos).min(1.0)).max(0.0).sqrt())
}

/// Sine distance between two kernel-expansion functions via shared midpoint
/// quadrature with `quad_m` nodes.
pub fn dist_fun(f: &RkhsFunction, g: &RkhsFunction, quad_m: usize) -> Result<f64> {
    dist_samples(&f.quad_samples(quad_m), &g.quad_samples(quad_m))
}

/// One singular component reduced to the pieces the evaluation needs:
/// the two mode vectors and the singular function sampled on the shared
/// quadrature grid.
#[derive(Debug, Clone)]
pub struct ScoredComponent {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentScore {
    pub dist_a: f64,
    pub dist_b: f64,
    pub dist_xi: f64,
}

/// Per-component distances after matching, plus plain mean/sd aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_component: Vec<ComponentScore>,
    /// `matching[e] = t`: estimated component `e` was scored against truth
    /// component `t`.
    pub matching: Vec<usize>,
    pub mean_dist_a: f64,
    pub sd_dist_a: f64,
    pub mean_dist_b: f64,
    pub sd_dist_b: f64,
    pub mean_dist_xi: f64,
    pub sd_dist_xi: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn abs_cos(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let d = u.dot(v) / (u.norm() * v.norm());
    d.abs().min(1.0)
}

/// Greedily matches estimated to truth components by largest mode-1 |cos|,
/// then reports all three sine distances per matched pair.
pub fn match_and_score(
    estimated: &[ScoredComponent],
    truth: &[ScoredComponent],
) -> Result<EvalReport> {
    if estimated.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated vs {} truth components",
            estimated.len(),
            truth.len()
        )));
    }
    if estimated.is_empty() {
        return Err(Error::InvalidArgument("no components to score".into()));
    }
    let r = estimated.len();
    let mut cos = vec![vec![0.0; r]; r];
    for (e, est) in estimated.iter().enumerate() {
        for (t, tru) in truth.iter().enumerate() {
            if est.a.len() != tru.a.len() {
                return Err(Error::DimensionMismatch(
                    "mode-1 lengths differ between estimate and truth".into(),
                ));
            }
            cos[e][t] = abs_cos(&est.a, &tru.a);
        }
    }
    let mut matching = vec![usize::MAX; r];
    let mut e_used = vec![false; r];
    let mut t_used = vec![false; r];
    for _ in 0..r {
        let mut best = (0usize, 0usize, -1.0f64);
        for e in 0..r {
            if e_used[e] {
                continue;
            }
            for t in 0..r {
                if t_used[t] {
                    continue;
                }
                if cos[e][t] > best.2 {
                    best = (e, t, cos[e][t]);
                }
            }
        }
        matching[best.0] = best.1;
        e_used[best.0] = true;
        t_used[best.1] = true;
    }

    let mut per_component = Vec::with_capacity(r);
    for (e, est) in estimated.iter().enumerate() {
        let tru = &truth[matching[e]];
        per_component.push(ComponentScore {
            dist_a: dist_vec(&est.a, &tru.a)?,
            dist_b: dist_vec(&est.b, &tru.b)?,
            dist_xi: dist_samples(&est.xi, &tru.xi)?,
        });
    }
    let (mean_dist_a, sd_dist_a) =
        mean_sd(&per_component.iter().map(|c| c.dist_a).collect::<Vec<_>>());
    let (mean_dist_b, sd_dist_b) =
        mean_sd(&per_component.iter().map(|c| c.dist_b).collect::<Vec<_>>());
    let (mean_dist_xi, sd_dist_xi) =
        mean_sd(&per_component.iter().map(|c| c.dist_xi).collect::<Vec<_>>());
    Ok(EvalReport {
        per_component,
        matching,
        mean_dist_a,
        sd_dist_a,
        mean_dist_b,
        sd_dist_b,
        mean_dist_xi,
        sd_dist_xi,
    })
}

/// Spectral norm of a dense matrix through the symmetric eigenproblem of its
/// smaller Gram side.
fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let g = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let top = g
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    top.max(0.0).sqrt()
}

/// Max over grid indices of the spectral norm of the remainder slice
/// `Z_{..s_k}`; a grid lower proxy for the continuum supremum.
pub fn remainder_sup_norm(z: &Tensor3) -> f64 {
    (0..z.n())
        .map(|k| spectral_norm(&z.slice(k)))
        .fold(0.0, f64::max)
}

/// `T_{ik} = sum_j b_j Y_{ijk}`: each row is one unit-1 trajectory weighted
/// by the mode-2 singular vector.
pub fn aggregate_trajectories(y: &Tensor3, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    if b.len() != y.p2() {
        return Err(Error::DimensionMismatch(format!(
            "weight vector has length {}, tensor mode-2 dimension is {}",
            b.len(),
            y.p2()
        )));
    }
    y.mode2_product(b)
}

/// One row of the trajectory band table: group mean and
/// `mean +- 1.64 * (standard error of the mean)` at one time index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryBand {
    /// 1-based time index, matching the CSV convention.
    pub time_index: usize,
    pub group: String,
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

/// Group means and error bands of aggregated trajectories, given one group
/// label per mode-1 unit. Groups are emitted in sorted order per time index.
pub fn trajectory_bands(traj: &DMatrix<f64>, labels: &[String]) -> Result<Vec<TrajectoryBand>> {
    if labels.len() != traj.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} trajectories",
            labels.len(),
            traj.nrows()
        )));
    }
    let mut groups: Vec<String> = labels.to_vec();
    groups.sort();
    groups.dedup();
    let mut out = Vec::with_capacity(groups.len() * traj.ncols());
    for k in 0..traj.ncols() {
        for group in &groups {
            let values: Vec<f64> = labels
                .iter()
                .enumerate()
                .filter(|(_, l)| *l == group)
                .map(|(i, _)| traj[(i, k)])
                .collect();
            let (mean, sd) = mean_sd(&values);
            let sem = if values.len() >= 2 {
                sd / (values.len() as f64).sqrt()
            } else {
                0.0
            };
            out.push(TrajectoryBand {
                time_index: k + 1,
                group: group.clone(),
                mean,
                low: mean - 1.64 * sem,
                high: mean + 1.64 * sem,
            });
        }
    }
    Ok(out)
}
