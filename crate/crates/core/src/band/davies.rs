//! Critical values for the χ²₂ process supremum.
//!
//! With two degrees of freedom the Davies upcrossing approximation reads
//!
//! ```text
//! P(sup g > u) ≈ e^{-u/2} (1 + C √u / π),
//! C = ∫ E‖η(t)‖ dt,   E‖η(t)‖ = (π/2) E|∂√g/∂t|.
//! ```

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{inverse, sqrt_g_derivative, SigmaPath};
use crate::design::rng_for;
use crate::error::{Error, Result};
use crate::linearize::{min_eigenvalue, regularize};
use crate::lorenz::CurveEstimate;
use crate::{Mat2, Vec2, Vec4};

/// Simulated Davies constant with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DaviesConstant {
    pub value: f64,
    pub std_error: f64,
}

/// Relative tolerance for negative eigenvalues of a stacked covariance.
const PSD_TOL: f64 = 1e-8;

/// Simulates `C` segment by segment.
///
/// For each segment the deviations `(L̂_k − μ_k, L̂_{k+1} − μ_{k+1})` are
/// drawn from the (regularized) stacked 4×4 covariance; `|∂√g/∂t|` is
/// averaged over draws on `grid` interior nodes plus both segment ends and
/// integrated by the trapezoid rule. Each segment uses its own random
/// sub-stream, so the result does not depend on thread scheduling.
pub fn estimate_c(
    path: &SigmaPath,
    est: &CurveEstimate,
    draws: usize,
    grid: usize,
    seed: u64,
) -> Result<DaviesConstant> {
    if draws < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 draws, got {draws}"
        )));
    }
    if grid < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 grid points, got {grid}"
        )));
    }
    if est.n() != path.n() {
        return Err(Error::invalid("estimate and covariance path disagree on n"));
    }
    let per_segment = (1..=path.segments())
        .into_par_iter()
        .map(|k| segment_integral(path, k, draws, grid, seed))
        .collect::<Result<Vec<_>>>()?;
    let mean: f64 = per_segment.iter().map(|s| s.0).sum();
    let var: f64 = per_segment.iter().map(|s| s.1).sum();
    let scale = PI / 2.0;
    Ok(DaviesConstant {
        value: scale * mean,
        std_error: scale * (var / draws as f64).sqrt(),
    })
}

/// Mean and variance over draws of `∫_segment |∂√g/∂t| dt`.
fn segment_integral(
    path: &SigmaPath,
    k: usize,
    draws: usize,
    grid: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let stacked = path.blocks.stacked(k);
    let lo = min_eigenvalue(&stacked);
    if lo < -PSD_TOL * stacked.trace().abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveSemidefinite {
            segment: k,
            min_eigenvalue: lo,
        });
    }
    let chol = regularize(&stacked, path.ridge, path.floor)
        .cholesky()
        .ok_or(Error::NotPositiveSemidefinite {
            segment: k,
            min_eigenvalue: lo,
        })?
        .l();

    let h = 1.0 / (grid + 1) as f64;
    let nodes: Vec<(f64, Mat2, Mat2)> = (0..=grid + 1)
        .map(|j| {
            let delta = j as f64 * h;
            let inv = inverse(&path.regularized(&path.segment_sigma(k, delta)))?;
            Ok((delta, inv, path.segment_sigma_dot(k, delta)))
        })
        .collect::<Result<_>>()?;

    let mut rng = rng_for(seed, &[k as u64]);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let xi = Vec4::from_fn(|_, _| StandardNormal.sample(&mut rng));
        let e = chol * xi;
        let e1 = Vec2::new(e[0], e[1]);
        let e2 = Vec2::new(e[2], e[3]);
        let d_dot = e2 - e1;
        let mut integral = 0.0;
        for (j, (delta, inv, dot)) in nodes.iter().enumerate() {
            let d = e1 * (1.0 - delta) + e2 * *delta;
            let v = sqrt_g_derivative(&d, &d_dot, inv, dot).abs();
            let w = if j == 0 || j == grid + 1 { 0.5 } else { 1.0 };
            integral += w * v;
        }
        integral *= h;
        sum += integral;
        sum_sq += integral * integral;
    }
    let m = draws as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok((mean, var))
}

/// Davies tail approximation for the χ²₂ process supremum.
pub fn davies_tail(c: f64, u: f64) -> f64 {
    (-u / 2.0).exp() * (1.0 + c * u.sqrt() / PI)
}

/// Adjusted critical value `u_α`: the root of `davies_tail(C, u) = α` at or
/// above the χ²₂ quantile, by bisection.
pub fn scb_critical(c: f64, alpha: f64) -> Result<f64> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "Davies constant {c} must be finite and >= 0"
        )));
    }
    let mut lo = pcb_critical(alpha)?;
    if c == 0.0 {
        return Ok(lo);
    }
    let f = |u: f64| davies_tail(c, u) - alpha;
    let mut hi = lo + 50.0;
    while f(hi) > 0.0 {
        hi += 50.0;
    }
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(1-α)` quantile of χ²₂, `−2 ln α`.
pub fn pcb_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0,1)")));
    }
    Ok(-2.0 * alpha.ln())
}
