//! Plug-in estimators of the Lorenz curve points and their interpolation.
//!
//! Point `k` (1-based) is the `k`-th smallest sampled unit; ties keep their
//! sorted position, so a duplicate income yields two distinct points with
//! the same ordinate slope.

use serde::Serialize;

use crate::design::SampleDraw;
use crate::error::{Error, Result};
use crate::popdata::CurvePoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveEstimate {
    /// `L̂_1 .. L̂_n`.
    pub points: Vec<CurvePoint>,
    /// Estimated population size `N̂ = Σ w_i`.
    pub size_hat: f64,
    /// Estimated total `Ŷ = Σ w_i y_i`.
    pub total_hat: f64,
}

impl CurveEstimate {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// `L̂_k`, 1-based.
    pub fn point(&self, k: usize) -> CurvePoint {
        self.points[k - 1]
    }

    /// Segment index and offset for `t` in `[1, n-1]`; the right end maps
    /// to the last segment with offset 1.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        locate(self.n(), t)
    }
}

pub(crate) fn locate(n: usize, t: f64) -> Result<(usize, f64)> {
    let hi = (n - 1) as f64;
    if n < 2 || !(1.0..=hi).contains(&t) {
        return Err(Error::invalid(format!("t = {t} outside [1, {hi}]")));
    }
    if n == 2 {
        return Ok((1, 0.0));
    }
    let k = (t.floor() as usize).min(n - 2);
    Ok((k, t - k as f64))
}

/// Plug-in points for incomes `y` (ascending) with weights `w`, holding
/// the sort order fixed. Returns `(points, N̂, Ŷ)`.
pub fn plug_in_points(y: &[f64], w: &[f64]) -> (Vec<CurvePoint>, f64, f64) {
    let size_hat: f64 = w.iter().sum();
    let total_hat: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let mut count = 0.0;
    let mut mass = 0.0;
    let points = y
        .iter()
        .zip(w)
        .map(|(&yi, &wi)| {
            count += wi;
            mass += wi * yi;
            CurvePoint::new(count / size_hat, mass / total_hat)
        })
        .collect();
    (points, size_hat, total_hat)
}

pub fn estimate_points(s: &SampleDraw) -> Result<CurveEstimate> {
    let (mut points, size_hat, total_hat) = plug_in_points(&s.y, &s.weights);
    if !(total_hat > 0.0) {
        return Err(Error::ZeroTotal);
    }
    if let Some(last) = points.last_mut() {
        *last = CurvePoint::new(1.0, 1.0);
    }
    Ok(CurveEstimate {
        points,
        size_hat,
        total_hat,
    })
}

/// `L̂(t) = (1-δ) L̂_k + δ L̂_{k+1}` with `k = [t]`, `δ = t - [t]`.
pub fn interpolate(est: &CurveEstimate, t: f64) -> Result<CurvePoint> {
    let (k, delta) = est.locate(t)?;
    if delta == 0.0 {
        return Ok(est.point(k));
    }
    Ok(est.point(k).lerp(est.point(k + 1), delta))
}
