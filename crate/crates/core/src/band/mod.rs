//! Confidence bands for the estimated Lorenz curve.
//!
//! Along `t ∈ [1, n-1]` the estimator `L̂(t)` interpolates neighbouring
//! points, and its covariance is
//!
//! ```text
//! Σ(t) = (1-δ)² Σ_{k,k} + δ(1-δ) (Σ_{k,k+1} + Σ_{k+1,k}) + δ² Σ_{k+1,k+1}.
//! ```
//!
//! A band is the union over `t` of the ellipses
//! `{x : (L̂(t) - x)ᵀ Σ(t)⁻¹ (L̂(t) - x) < c}`. The point-wise band uses the
//! χ²₂ quantile for `c`; the simultaneous band uses the Davies-adjusted
//! value from [`scb_critical`].

mod davies;
mod geometry;

pub use davies::{estimate_c, pcb_critical, scb_critical, DaviesConstant};
pub use geometry::{band_geometry, clip_to_wedge, BandGeometry};

use serde::{Deserialize, Serialize};

use crate::design::SampleDraw;
use crate::error::{Error, Result};
use crate::linearize::{cov_blocks, regularize, CovBlocks, DEFAULT_FLOOR, DEFAULT_RIDGE};
use crate::lorenz::{estimate_points, interpolate, locate, CurveEstimate};
use crate::popdata::CurvePoint;
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    Pcb,
    Scb,
}

impl BandKind {
    pub fn label(self) -> &'static str {
        match self {
            BandKind::Pcb => "PCB",
            BandKind::Scb => "SCB",
        }
    }
}

impl std::str::FromStr for BandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcb" => Ok(BandKind::Pcb),
            "scb" => Ok(BandKind::Scb),
            other => Err(Error::invalid(format!("unknown band kind `{other}`"))),
        }
    }
}

/// `Σ(t)` along the estimated curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPath {
    pub blocks: CovBlocks,
    pub ridge: f64,
    pub floor: f64,
}

impl SigmaPath {
    pub fn new(blocks: CovBlocks) -> Self {
        SigmaPath {
            blocks,
            ridge: DEFAULT_RIDGE,
            floor: DEFAULT_FLOOR,
        }
    }

    /// Number of curve points `n`.
    pub fn n(&self) -> usize {
        self.blocks.points() + 1
    }

    /// Number of unit segments of `[1, n-1]`.
    pub fn segments(&self) -> usize {
        self.blocks.cross.len()
    }

    /// Unregularized `Σ` on segment `k` at offset `delta`.
    pub fn segment_sigma(&self, k: usize, delta: f64) -> Mat2 {
        let a = self.blocks.diag(k);
        let b = self.blocks.diag(k + 1);
        let x = self.blocks.off(k);
        let c = 1.0 - delta;
        a * (c * c) + (x + x.transpose()) * (delta * c) + b * (delta * delta)
    }

    /// `dΣ/dδ` on segment `k`.
    pub fn segment_sigma_dot(&self, k: usize, delta: f64) -> Mat2 {
        let a = self.blocks.diag(k);
        let b = self.blocks.diag(k + 1);
        let x = self.blocks.off(k);
        a * (-2.0 * (1.0 - delta)) + (x + x.transpose()) * (1.0 - 2.0 * delta) + b * (2.0 * delta)
    }

    pub fn regularized(&self, m: &Mat2) -> Mat2 {
        regularize(m, self.ridge, self.floor)
    }
}

pub fn sigma_at(path: &SigmaPath, t: f64) -> Result<Mat2> {
    let (k, delta) = locate(path.n(), t)?;
    Ok(path.regularized(&path.segment_sigma(k, delta)))
}

/// `dᵀ Σ⁻¹ d` through a 2×2 LDLᵀ factorization.
pub fn quad_form(sigma: &Mat2, d: &Vec2) -> Result<f64> {
    let a = sigma[(0, 0)];
    let b = 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]);
    let schur = sigma[(1, 1)] - b * b / a;
    if !(a > 0.0 && schur > 0.0) {
        return Err(Error::SingularCovariance);
    }
    let r = d[1] - b / a * d[0];
    Ok(d[0] * d[0] / a + r * r / schur)
}

pub(crate) fn inverse(sigma: &Mat2) -> Result<Mat2> {
    let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
    if !(det > 0.0) || !(sigma[(0, 0)] > 0.0) {
        return Err(Error::SingularCovariance);
    }
    Ok(Mat2::new(sigma[(1, 1)], -sigma[(0, 1)], -sigma[(1, 0)], sigma[(0, 0)]) / det)
}

fn diff(a: CurvePoint, b: CurvePoint) -> Vec2 {
    Vec2::new(a.p - b.p, a.q - b.q)
}

/// The chi-square process `g(t)` at the candidate curve point `x`.
pub fn g_value(est: &CurveEstimate, path: &SigmaPath, t: f64, x: CurvePoint) -> Result<f64> {
    let center = interpolate(est, t)?;
    quad_form(&sigma_at(path, t)?, &diff(center, x))
}

/// `d√g/dt` given the deviation `d`, its derivative, `Σ⁻¹` and `Σ̇`:
///
/// ```text
/// d√g/dt = [2 ḋᵀ Σ⁻¹ d − dᵀ Σ⁻¹ Σ̇ Σ⁻¹ d] / (2 √g)
/// ```
///
/// Zero when `g = 0`.
pub fn sqrt_g_derivative(d: &Vec2, d_dot: &Vec2, sigma_inv: &Mat2, sigma_dot: &Mat2) -> f64 {
    let sd = sigma_inv * d;
    let g = d.dot(&sd);
    if !(g > 0.0) {
        return 0.0;
    }
    let dg = 2.0 * d_dot.dot(&sd) - sd.dot(&(sigma_dot * sd));
    dg / (2.0 * g.sqrt())
}

/// `d√g/dt` for the fixed point `x` (which does not move with `t`).
pub fn dg_sqrt_dt(est: &CurveEstimate, path: &SigmaPath, t: f64, x: CurvePoint) -> Result<f64> {
    let (k, delta) = locate(path.n(), t)?;
    let center = est.point(k).lerp(est.point(k + 1), delta);
    let d = diff(center, x);
    let d_dot = diff(est.point(k + 1), est.point(k));
    let sigma_inv = inverse(&path.regularized(&path.segment_sigma(k, delta)))?;
    Ok(sqrt_g_derivative(
        &d,
        &d_dot,
        &sigma_inv,
        &path.segment_sigma_dot(k, delta),
    ))
}

/// Grid and Monte Carlo settings for band construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandOptions {
    /// Interior quadrature nodes per segment when simulating `C`.
    pub c_grid: usize,
    /// Grid nodes per segment for containment minimization.
    pub contains_grid: usize,
    /// Gaussian draws per segment when simulating `C`.
    pub mc_draws: usize,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            c_grid: 8,
            contains_grid: 16,
            mc_draws: 1000,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    center: Vec2,
    inv: Mat2,
}

/// An estimated curve, its covariance path and a critical value.
#[derive(Debug, Clone)]
pub struct Band {
    pub est: CurveEstimate,
    pub sigma: SigmaPath,
    pub critical: f64,
    pub kind: BandKind,
    pub alpha: f64,
    /// Grid nodes per segment.
    pub t_grid: usize,
    nodes: Vec<Node>,
}

const REFINE_TOL: f64 = 1e-6;

impl Band {
    pub fn new(
        est: CurveEstimate,
        sigma: SigmaPath,
        kind: BandKind,
        alpha: f64,
        critical: f64,
        t_grid: usize,
    ) -> Result<Self> {
        if est.n() != sigma.n() {
            return Err(Error::invalid("estimate and covariance path disagree on n"));
        }
        if sigma.segments() == 0 {
            return Err(Error::invalid("band needs at least one segment"));
        }
        if !(critical > 0.0) {
            return Err(Error::invalid(format!(
                "critical value {critical} must be positive"
            )));
        }
        if kind == BandKind::Scb && critical < pcb_critical(alpha)? {
            return Err(Error::invalid(
                "SCB critical value below the point-wise quantile",
            ));
        }
        if t_grid == 0 {
            return Err(Error::invalid("t grid must be positive"));
        }
        let mut band = Band {
            est,
            sigma,
            critical,
            kind,
            alpha,
            t_grid,
            nodes: Vec::new(),
        };
        let count = band.sigma.segments() * t_grid + 1;
        band.nodes = (0..count)
            .map(|j| {
                let t = band.node_t(j);
                let c = interpolate(&band.est, t)?;
                Ok(Node {
                    center: Vec2::new(c.p, c.q),
                    inv: inverse(&sigma_at(&band.sigma, t)?)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(band)
    }

    /// Same curve and covariance with a different critical value.
    pub fn with_critical(&self, kind: BandKind, critical: f64) -> Result<Band> {
        if !(critical > 0.0) {
            return Err(Error::invalid(format!(
                "critical value {critical} must be positive"
            )));
        }
        if kind == BandKind::Scb && critical < pcb_critical(self.alpha)? {
            return Err(Error::invalid(
                "SCB critical value below the point-wise quantile",
            ));
        }
        let mut out = self.clone();
        out.kind = kind;
        out.critical = critical;
        Ok(out)
    }

    pub fn node_t(&self, j: usize) -> f64 {
        1.0 + j as f64 / self.t_grid as f64
    }

    /// Grid values of `t`.
    pub fn t_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes.len()).map(|j| self.node_t(j))
    }

    pub fn t_max(&self) -> f64 {
        (self.est.n() - 1) as f64
    }

    /// `min_t g(t, x)` and its minimizer: grid scan, then golden-section
    /// refinement around the best node.
    pub fn min_g(&self, x: CurvePoint) -> (f64, f64) {
        let xv = Vec2::new(x.p, x.q);
        let mut best = (f64::INFINITY, 0usize);
        for (j, node) in self.nodes.iter().enumerate() {
            let d = node.center - xv;
            let g = d.dot(&(node.inv * d));
            if g < best.0 {
                best = (g, j);
            }
        }
        let t0 = self.node_t(best.1);
        let h = 1.0 / self.t_grid as f64;
        let lo = (t0 - h).max(1.0);
        let hi = (t0 + h).min(self.t_max());
        let f = |t: f64| g_value(&self.est, &self.sigma, t, x).unwrap_or(f64::INFINITY);
        let (t_ref, g_ref) = golden_section(f, lo, hi, REFINE_TOL);
        if g_ref < best.0 {
            (g_ref, t_ref)
        } else {
            (best.0, t0)
        }
    }

    pub fn contains(&self, x: CurvePoint) -> bool {
        self.min_g(x).0 < self.critical
    }
}

/// Strict membership in the union of ellipses.
pub fn band_contains(band: &Band, x: CurvePoint) -> bool {
    band.contains(x)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    let ft = f(t);
    [(c, fc), (d, fd), (t, ft)]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

/// Output of the full sample-to-band pipeline.
#[derive(Debug, Clone)]
pub struct BandFit {
    pub band: Band,
    pub davies: Option<DaviesConstant>,
}

/// Estimates the curve, its covariance path and (for SCB) the Davies
/// constant, then assembles the band.
pub fn build_band(
    s: &SampleDraw,
    kind: BandKind,
    alpha: f64,
    opts: &BandOptions,
    seed: u64,
) -> Result<BandFit> {
    let est = estimate_points(s)?;
    let path = SigmaPath::new(cov_blocks(s, &est)?);
    let (critical, davies) = match kind {
        BandKind::Pcb => (pcb_critical(alpha)?, None),
        BandKind::Scb => {
            let c = estimate_c(&path, &est, opts.mc_draws, opts.c_grid, seed)?;
            (scb_critical(c.value, alpha)?, Some(c))
        }
    };
    let band = Band::new(est, path, kind, alpha, critical, opts.contains_grid)?;
    Ok(BandFit { band, davies })
}
