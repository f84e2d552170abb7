//! Dense order-3 tensors and the time grid of the sampled functional mode.
//!
//! Entry `(i, j, k)` of a `p1 x p2 x n` tensor lives at `(k*p1 + i)*p2 + j`,
//! i.e. the grid index `k` varies slowest. Row `k` of the mode-3
//! matricization is therefore one contiguous block, which is the hot path of
//! the ridge update (`M3(Y) (a (x) b)`).
//!
//! Matricization column maps (1-based, as used in the CSV docs):
//! - mode 1: `p1 x (p2*n)`, column `j + p2*(k-1)`;
//! - mode 2: `p2 x (p1*n)`, column `i + p1*(k-1)`;
//! - mode 3: `n x (p1*p2)`, column `j + p2*(i-1)`.
//!
//! Modes 2 and 3 are the unique layouts under which, for a rank-1 tensor
//! `lambda a(x)b(x)v`, `M2 = lambda b (v (x) a)^T` and `M3 (a (x) b)` with
//! `(a (x) b)_{(i-1)p2+j} = a_i b_j` both hold; the unit tests pin these
//! identities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sorted measurement times `s_1 <= ... <= s_n` in `[0, 1]`.
///
/// The constructor sorts its input and records the permutation so that
/// tensor slices read from external files can be re-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    perm: Vec<usize>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("time grid must be non-empty".into()));
        }
        for (k, &s) in points.iter().enumerate() {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "grid point {} (value {s}) is outside [0, 1]",
                    k + 1
                )));
            }
        }
        let mut perm: Vec<usize> = (0..points.len()).collect();
        perm.sort_by(|&x, &y| points[x].total_cmp(&points[y]));
        let sorted = perm.iter().map(|&k| points[k]).collect();
        Ok(Self { points: sorted, perm })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `permutation()[new_index] = original_index` of the unsorted input.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// True when the constructor input was already sorted.
    pub fn input_was_sorted(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &p)| k == p)
    }
}

/// One discretized rank-1 term `lambda a (x) b (x) v` used by [`Tensor3::rss`].
#[derive(Debug, Clone)]
pub struct Rank1Term {
    pub lambda: f64,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub v: DVector<f64>,
}

/// Result of contracting one or more modes of a [`Tensor3`] with vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Contraction {
    /// One mode contracted.
    Matrix(DMatrix<f64>),
    /// Two modes contracted.
    Vector(DVector<f64>),
    /// All three modes contracted.
    Scalar(f64),
}

/// Dense `p1 x p2 x n` tensor of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    p1: usize,
    p2: usize,
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(p1: usize, p2: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if p1 == 0 || p2 == 0 || n == 0 {
            return Err(Error::InvalidArgument(
                "tensor dimensions must all be >= 1".into(),
            ));
        }
        if data.len() != p1 * p2 * n {
            return Err(Error::DimensionMismatch(format!(
                "a {p1}x{p2}x{n} tensor needs {} values, got {}",
                p1 * p2 * n,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tensor entry at flat index {pos} is not finite"
            )));
        }
        Ok(Self { p1, p2, n, data })
    }

    pub fn zeros(p1: usize, p2: usize, n: usize) -> Result<Self> {
        Self::new(p1, p2, n, vec![0.0; p1 * p2 * n])
    }

    /// Builds a tensor from a function of 0-based `(i, j, k)`.
    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        p1: usize,
        p2: usize,
        n: usize,
        mut f: F,
    ) -> Result<Self> {
        if p1 == 0 || p2 == 0 || n == 0 {
            return Err(Error::InvalidArgument(
                "tensor dimensions must all be >= 1".into(),
            ));
        }
        let mut data = Vec::with_capacity(p1 * p2 * n);
        for k in 0..n {
            for i in 0..p1 {
                for j in 0..p2 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(p1, p2, n, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.p1, self.p2, self.n)
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.p1 && j < self.p2 && k < self.n);
        (k * self.p1 + i) * self.p2 + j
    }

    /// 0-based accessor.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = value;
    }

    /// The `p1 x p2` mode-3 slice at grid index `k`.
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        assert!(k < self.n, "slice index {k} out of range");
        DMatrix::from_fn(self.p1, self.p2, |i, j| self.get(i, j, k))
    }

    pub fn matricize(&self, mode: usize) -> Result<DMatrix<f64>> {
        match mode {
            1 => Ok(DMatrix::from_fn(self.p1, self.p2 * self.n, |i, c| {
                self.get(i, c % self.p2, c / self.p2)
            })),
            2 => Ok(DMatrix::from_fn(self.p2, self.p1 * self.n, |j, c| {
                self.get(c % self.p1, j, c / self.p1)
            })),
            3 => Ok(DMatrix::from_fn(self.n, self.p1 * self.p2, |k, c| {
                self.get(c / self.p2, c % self.p2, k)
            })),
            m => Err(Error::InvalidArgument(format!(
                "matricization mode must be 1, 2 or 3, got {m}"
            ))),
        }
    }

    fn check_len(&self, len: usize, expected: usize, mode: usize) -> Result<()> {
        if len != expected {
            return Err(Error::DimensionMismatch(format!(
                "mode-{mode} vector has length {len}, expected {expected}"
            )));
        }
        Ok(())
    }

    /// `(Y x_1 u)_{jk} = sum_i u_i Y_{ijk}`, a `p2 x n` matrix.
    pub fn mode1_product(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(u.len(), self.p1, 1)?;
        let mut out = DMatrix::zeros(self.p2, self.n);
        for k in 0..self.n {
            for i in 0..self.p1 {
                let ui = u[i];
                let base = (k * self.p1 + i) * self.p2;
                for j in 0..self.p2 {
                    out[(j, k)] += ui * self.data[base + j];
                }
            }
        }
        Ok(out)
    }

    /// `(Y x_2 v)_{ik} = sum_j v_j Y_{ijk}`, a `p1 x n` matrix.
    pub fn mode2_product(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(v.len(), self.p2, 2)?;
        let mut out = DMatrix::zeros(self.p1, self.n);
        for k in 0..self.n {
            for i in 0..self.p1 {
                let base = (k * self.p1 + i) * self.p2;
                let mut acc = 0.0;
                for j in 0..self.p2 {
                    acc += v[j] * self.data[base + j];
                }
                out[(i, k)] = acc;
            }
        }
        Ok(out)
    }

    /// `(Y x_3 w)_{ij} = sum_k w_k Y_{ijk}`, a `p1 x p2` matrix.
    pub fn mode3_product(&self, w: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(w.len(), self.n, 3)?;
        let mut out = DMatrix::zeros(self.p1, self.p2);
        for k in 0..self.n {
            let wk = w[k];
            for i in 0..self.p1 {
                let base = (k * self.p1 + i) * self.p2;
                for j in 0..self.p2 {
                    out[(i, j)] += wk * self.data[base + j];
                }
            }
        }
        Ok(out)
    }

    /// `(Y x_1 a x_2 b)_k`, a length-`n` vector. Equals `M3(Y) (a (x) b)`.
    pub fn contract12(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(a.len(), self.p1, 1)?;
        self.check_len(b.len(), self.p2, 2)?;
        let mut out = DVector::zeros(self.n);
        for k in 0..self.n {
            let mut acc = 0.0;
            for i in 0..self.p1 {
                let base = (k * self.p1 + i) * self.p2;
                let mut row = 0.0;
                for j in 0..self.p2 {
                    row += b[j] * self.data[base + j];
                }
                acc += a[i] * row;
            }
            out[k] = acc;
        }
        Ok(out)
    }

    /// `(Y x_1 a x_3 w)_j`, a length-`p2` vector.
    pub fn contract13(&self, a: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(a.len(), self.p1, 1)?;
        self.check_len(w.len(), self.n, 3)?;
        let mut out = DVector::zeros(self.p2);
        for k in 0..self.n {
            let wk = w[k];
            for i in 0..self.p1 {
                let c = wk * a[i];
                let base = (k * self.p1 + i) * self.p2;
                for j in 0..self.p2 {
                    out[j] += c * self.data[base + j];
                }
            }
        }
        Ok(out)
    }

    /// `(Y x_2 b x_3 w)_i`, a length-`p1` vector.
    pub fn contract23(&self, b: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(b.len(), self.p2, 2)?;
        self.check_len(w.len(), self.n, 3)?;
        let mut out = DVector::zeros(self.p1);
        for k in 0..self.n {
            let wk = w[k];
            for i in 0..self.p1 {
                let base = (k * self.p1 + i) * self.p2;
                let mut row = 0.0;
                for j in 0..self.p2 {
                    row += b[j] * self.data[base + j];
                }
                out[i] += wk * row;
            }
        }
        Ok(out)
    }

    /// `Y x_1 a x_2 b x_3 w`, a scalar.
    pub fn contract_all(
        &self,
        a: &DVector<f64>,
        b: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<f64> {
        Ok(self.contract12(a, b)?.dot(w))
    }

    /// Contracts each supplied mode; at least one must be supplied.
    pub fn contract(
        &self,
        a: Option<&DVector<f64>>,
        b: Option<&DVector<f64>>,
        v: Option<&DVector<f64>>,
    ) -> Result<Contraction> {
        match (a, b, v) {
            (Some(a), None, None) => Ok(Contraction::Matrix(self.mode1_product(a)?)),
            (None, Some(b), None) => Ok(Contraction::Matrix(self.mode2_product(b)?)),
            (None, None, Some(v)) => Ok(Contraction::Matrix(self.mode3_product(v)?)),
            (Some(a), Some(b), None) => Ok(Contraction::Vector(self.contract12(a, b)?)),
            (Some(a), None, Some(v)) => Ok(Contraction::Vector(self.contract13(a, v)?)),
            (None, Some(b), Some(v)) => Ok(Contraction::Vector(self.contract23(b, v)?)),
            (Some(a), Some(b), Some(v)) => Ok(Contraction::Scalar(self.contract_all(a, b, v)?)),
            (None, None, None) => Err(Error::InvalidArgument(
                "contract requires at least one vector".into(),
            )),
        }
    }

    /// The rank-1 tensor with entries `lambda a_i b_j v_k`.
    pub fn rank1(lambda: f64, a: &DVector<f64>, b: &DVector<f64>, v: &DVector<f64>) -> Result<Self> {
        Self::from_fn(a.len(), b.len(), v.len(), |i, j, k| {
            lambda * a[i] * b[j] * v[k]
        })
    }

    /// Elementwise `self - lambda a (x) b (x) v`.
    pub fn subtract_rank1(
        &self,
        lambda: f64,
        a: &DVector<f64>,
        b: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<Self> {
        self.check_len(a.len(), self.p1, 1)?;
        self.check_len(b.len(), self.p2, 2)?;
        self.check_len(v.len(), self.n, 3)?;
        let mut data = self.data.clone();
        for k in 0..self.n {
            let lv = lambda * v[k];
            for i in 0..self.p1 {
                let c = lv * a[i];
                let base = (k * self.p1 + i) * self.p2;
                for j in 0..self.p2 {
                    data[base + j] -= c * b[j];
                }
            }
        }
        Ok(Self {
            p1: self.p1,
            p2: self.p2,
            n: self.n,
            data,
        })
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Residual sum of squares of the rank-1 expansion against this tensor:
    /// `sum_{ijk} (Y_ijk - sum_l lambda_l a_li b_lj v_lk)^2`.
    pub fn rss(&self, terms: &[Rank1Term]) -> Result<f64> {
        for (l, t) in terms.iter().enumerate() {
            if t.a.len() != self.p1 || t.b.len() != self.p2 || t.v.len() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "term {} has shape ({}, {}, {}), tensor is {}x{}x{}",
                    l + 1,
                    t.a.len(),
                    t.b.len(),
                    t.v.len(),
                    self.p1,
                    self.p2,
                    self.n
                )));
            }
        }
        let mut acc = 0.0;
        for k in 0..self.n {
            for i in 0..self.p1 {
                let base = (k * self.p1 + i) * self.p2;
                for j in 0..self.p2 {
                    let mut model = 0.0;
                    for t in terms {
                        model += t.lambda * t.a[i] * t.b[j] * t.v[k];
                    }
                    let r = self.data[base + j] - model;
                    acc += r * r;
                }
            }
        }
        Ok(acc)
    }

    /// Reorders mode-3 slices so that new slice `k` is old slice `perm[k]`.
    /// Used to align tensors read from files with a sorted [`TimeGrid`].
    pub fn reorder_mode3(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation has length {}, tensor has {} slices",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || seen[p] {
                return Err(Error::InvalidArgument(
                    "mode-3 reorder requires a permutation of 0..n".into(),
                ));
            }
            seen[p] = true;
        }
        let block = self.p1 * self.p2;
        let mut data = Vec::with_capacity(self.data.len());
        for &old_k in perm {
            data.extend_from_slice(&self.data[old_k * block..(old_k + 1) * block]);
        }
        Ok(Self {
            p1: self.p1,
            p2: self.p2,
            n: self.n,
            data,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            p1: self.p1,
            p2: self.p2,
            n: self.n,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }
}
