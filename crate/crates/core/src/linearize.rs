//! Linearized variables of the Lorenz point estimators and the
//! Horvitz-Thompson covariance estimators built from them.
//!
//! For point `k` the sample linearized variables are
//!
//! ```text
//! ẑ_{k(1)i} = (1[i ≤ k] − L̂_{k(1)}) / N̂
//! ẑ_{k(2)i} = y_i (1[i ≤ k] − L̂_{k(2)}) / Ŷ
//! ```
//!
//! and the covariance of `(L̂_j, L̂_k)` is estimated by `Ĵ_j Δ Ĵ_kᵀ`, where
//! `Ĵ_k` is the 2×n matrix with rows `ẑ_{k(1)}`, `ẑ_{k(2)}` and `Δ` is the
//! SRSWOR matrix with `N(N−n)/n²` on the diagonal and `−N(N−n)/(n²(n−1))`
//! elsewhere. `Δ` is never formed: with `Δ = (d − o) I + o 𝟙𝟙ᵀ` the
//! sandwich `a Δ bᵀ` is `(d − o) Σ a_i b_i + o (Σ a_i)(Σ b_i)`.

use nalgebra::{DMatrix, SMatrix};

use crate::design::SampleDraw;
use crate::error::{Error, Result};
use crate::lorenz::{plug_in_points, CurveEstimate};
use crate::{Mat2, Mat4};

/// Default relative ridge applied by [`regularize`].
pub const DEFAULT_RIDGE: f64 = 1e-10;
/// Default eigenvalue floor applied by [`regularize`].
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Linearized variables of point `k` over the sample units.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSet {
    /// 1-based point index.
    pub k: usize,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
}

/// Per-point covariance blocks and neighbour cross-covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBlocks {
    /// `Σ_{k,k}` for `k = 1..n-1` (index `k-1`).
    pub sigma: Vec<Mat2>,
    /// `Σ_{k,k+1}` for `k = 1..n-2` (index `k-1`).
    pub cross: Vec<Mat2>,
}

impl CovBlocks {
    /// Number of curve points covered, `n - 1`.
    pub fn points(&self) -> usize {
        self.sigma.len()
    }

    /// `Σ_{k,k}`, 1-based.
    pub fn diag(&self, k: usize) -> &Mat2 {
        &self.sigma[k - 1]
    }

    /// `Σ_{k,k+1}`, 1-based.
    pub fn off(&self, k: usize) -> &Mat2 {
        &self.cross[k - 1]
    }

    /// The 4×4 covariance of `(L̂_k, L̂_{k+1})`.
    pub fn stacked(&self, k: usize) -> Mat4 {
        let mut m = Mat4::zeros();
        let a = self.diag(k);
        let b = self.diag(k + 1);
        let x = self.off(k);
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(x);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&x.transpose());
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
        m
    }
}

/// Structured SRSWOR `Δ`: diagonal and off-diagonal values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrsworDelta {
    pub diag: f64,
    pub off: f64,
}

impl SrsworDelta {
    pub fn new(big_n: usize, n: usize) -> Result<Self> {
        if n < 2 || n > big_n {
            return Err(Error::invalid(format!(
                "sample size {n} outside [2, {big_n}]"
            )));
        }
        let (bf, nf) = (big_n as f64, n as f64);
        let diag = bf * (bf - nf) / (nf * nf);
        Ok(SrsworDelta {
            diag,
            off: -diag / (nf - 1.0),
        })
    }

    pub fn for_sample(s: &SampleDraw) -> Result<Self> {
        Self::new(s.population_size, s.size())
    }

    /// `a Δ bᵀ` in O(n).
    pub fn sandwich(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        (self.diag - self.off) * dot + self.off * sa * sb
    }

    /// `Ĵ_a Δ Ĵ_bᵀ`.
    pub fn block(&self, a: &LinearizedSet, b: &LinearizedSet) -> Mat2 {
        Mat2::new(
            self.sandwich(&a.z1, &b.z1),
            self.sandwich(&a.z1, &b.z2),
            self.sandwich(&a.z2, &b.z1),
            self.sandwich(&a.z2, &b.z2),
        )
    }
}

pub fn linearized_vars(s: &SampleDraw, est: &CurveEstimate, k: usize) -> Result<LinearizedSet> {
    let n = s.size();
    if k < 1 || k > n {
        return Err(Error::invalid(format!("point index {k} outside [1, {n}]")));
    }
    let l = est.point(k);
    let (size_hat, total_hat) = (est.size_hat, est.total_hat);
    let mut z1 = Vec::with_capacity(n);
    let mut z2 = Vec::with_capacity(n);
    for (i, &y) in s.y.iter().enumerate() {
        let ind = if i < k { 1.0 } else { 0.0 };
        z1.push((ind - l.p) / size_hat);
        z2.push(y * (ind - l.q) / total_hat);
    }
    Ok(LinearizedSet { k, z1, z2 })
}

/// Central finite difference of `L̂_{k(h)}` with respect to the weight of
/// sample unit `i` (0-based), with the sort order held fixed.
pub fn finite_diff_oracle(s: &SampleDraw, k: usize, h: usize, i: usize, eps: f64) -> Result<f64> {
    let n = s.size();
    if k < 1 || k > n || i >= n || !(h == 1 || h == 2) {
        return Err(Error::invalid("finite difference index out of range"));
    }
    if !(eps > 0.0 && eps <= 0.01) {
        return Err(Error::invalid(format!("step {eps} outside (0, 0.01]")));
    }
    let eval = |shift: f64| {
        let mut w = s.weights.clone();
        w[i] += shift;
        let (pts, _, _) = plug_in_points(&s.y, &w);
        let pt = pts[k - 1];
        if h == 1 {
            pt.p
        } else {
            pt.q
        }
    };
    Ok((eval(eps) - eval(-eps)) / (2.0 * eps))
}

/// SRSWOR variance estimator of the total `Σ w_i z_i`:
/// `N²/n (1 − n/N) s²_z`.
pub fn variance_srswor(s: &SampleDraw, z: &[f64]) -> Result<f64> {
    let n = z.len();
    if n < 2 {
        return Err(Error::invalid("variance needs at least 2 units"));
    }
    let (bf, nf) = (s.population_size as f64, n as f64);
    let mean = z.iter().sum::<f64>() / nf;
    let ss: f64 = z.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(bf * bf / nf * (1.0 - nf / bf) * ss / (nf - 1.0))
}

/// Generalized Horvitz-Thompson variance estimator with common first- and
/// second-order inclusion probabilities (`π_ii = π_i`).
pub fn variance_general(z: &[f64], pi1: f64, pi2: f64) -> Result<f64> {
    if !(pi1 > 0.0 && pi2 > 0.0) {
        return Err(Error::ZeroInclusionProbability);
    }
    let mut acc = 0.0;
    for (i, &zi) in z.iter().enumerate() {
        for (j, &zj) in z.iter().enumerate() {
            let (pij, prod) = if i == j {
                (pi1, pi1 * pi1)
            } else {
                (pi2, pi1 * pi1)
            };
            acc += (zi / pi1) * (zj / pi1) * (pij - prod) / pij;
        }
    }
    Ok(acc)
}

/// Dense `Δ`. Only used for checks and small problems.
pub fn delta_matrix(big_n: usize, n: usize) -> Result<DMatrix<f64>> {
    let d = SrsworDelta::new(big_n, n)?;
    Ok(DMatrix::from_fn(
        n,
        n,
        |i, j| if i == j { d.diag } else { d.off },
    ))
}

/// `Σ_{k,k} = Ĵ_k Δ Ĵ_kᵀ`.
pub fn covariance_block(s: &SampleDraw, est: &CurveEstimate, k: usize) -> Result<Mat2> {
    let delta = SrsworDelta::for_sample(s)?;
    let j = linearized_vars(s, est, k)?;
    Ok(symmetrize(delta.block(&j, &j)))
}

/// `Σ_{k,k+1} = Ĵ_k Δ Ĵ_{k+1}ᵀ`.
pub fn cross_covariance_block(s: &SampleDraw, est: &CurveEstimate, k: usize) -> Result<Mat2> {
    if k + 1 > s.size() {
        return Err(Error::invalid(format!("no neighbour for point {k}")));
    }
    let delta = SrsworDelta::for_sample(s)?;
    let a = linearized_vars(s, est, k)?;
    let b = linearized_vars(s, est, k + 1)?;
    Ok(delta.block(&a, &b))
}

/// All blocks needed by the band: `Σ_{k,k}` for `k < n` and `Σ_{k,k+1}`
/// for `k < n-1`.
pub fn cov_blocks(s: &SampleDraw, est: &CurveEstimate) -> Result<CovBlocks> {
    let n = s.size();
    if n < 3 {
        return Err(Error::invalid(format!("band needs n >= 3, got {n}")));
    }
    let delta = SrsworDelta::for_sample(s)?;
    let mut sigma = Vec::with_capacity(n - 1);
    let mut cross = Vec::with_capacity(n - 2);
    let mut prev = linearized_vars(s, est, 1)?;
    sigma.push(symmetrize(delta.block(&prev, &prev)));
    for k in 2..n {
        let cur = linearized_vars(s, est, k)?;
        cross.push(delta.block(&prev, &cur));
        sigma.push(symmetrize(delta.block(&cur, &cur)));
        prev = cur;
    }
    Ok(CovBlocks { sigma, cross })
}

fn symmetrize<const D: usize>(m: SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<const D: usize>(m: &SMatrix<f64, D, D>) -> f64 {
    if D == 2 {
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let half_tr = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return half_tr - disc;
    }
    DMatrix::from_column_slice(D, D, m.as_slice())
        .symmetric_eigenvalues()
        .min()
}

/// Adds `ridge · trace/dim` to the diagonal, then lifts the spectrum so the
/// smallest eigenvalue is at least `floor`.
pub fn regularize<const D: usize>(
    m: &SMatrix<f64, D, D>,
    ridge: f64,
    floor: f64,
) -> SMatrix<f64, D, D> {
    let mut out = symmetrize(*m);
    let shift = ridge * out.trace() / D as f64;
    if shift > 0.0 {
        out += SMatrix::<f64, D, D>::identity() * shift;
    }
    let lo = min_eigenvalue(&out);
    if lo < floor {
        out += SMatrix::<f64, D, D>::identity() * (floor - lo);
    }
    out
}
