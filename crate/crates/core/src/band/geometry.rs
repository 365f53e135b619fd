//! Ellipse polygons and envelopes of a band, clipped to the Lorenz wedge
//! `{0 ≤ q ≤ p ≤ 1}`.

use std::f64::consts::PI;

use serde::Serialize;

use super::{sigma_at, Band};
use crate::error::{Error, Result};
use crate::lorenz::{interpolate, locate};
use crate::popdata::CurvePoint;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandGeometry {
    /// One clipped polygon per grid value of `t` (empty ones dropped).
    pub ellipses: Vec<Vec<CurvePoint>>,
    /// Extreme point of each ellipse on the side towards the diagonal.
    pub upper: Vec<CurvePoint>,
    /// Extreme point of each ellipse on the side away from the diagonal.
    pub lower: Vec<CurvePoint>,
}

pub fn band_geometry(band: &Band, resolution: usize) -> Result<BandGeometry> {
    if resolution < 16 {
        return Err(Error::invalid(format!("resolution {resolution} below 16")));
    }
    let radius = band.critical.sqrt();
    let ts: Vec<f64> = band.t_nodes().collect();
    let mut ellipses = Vec::with_capacity(ts.len());
    let mut upper = Vec::with_capacity(ts.len());
    let mut lower = Vec::with_capacity(ts.len());
    for t in ts {
        let center = interpolate(&band.est, t)?;
        let c = Vec2::new(center.p, center.q);
        let sigma = sigma_at(&band.sigma, t)?;
        let chol = sigma.cholesky().ok_or(Error::SingularCovariance)?.l();

        let polygon: Vec<CurvePoint> = (0..resolution)
            .map(|i| {
                let theta = 2.0 * PI * i as f64 / resolution as f64;
                let v = c + chol * Vec2::new(theta.cos(), theta.sin()) * radius;
                CurvePoint::new(v[0], v[1])
            })
            .collect();
        let clipped = clip_to_wedge(&polygon);
        if !clipped.is_empty() {
            ellipses.push(clipped);
        }

        // support points along the curve normal
        let (k, _) = locate(band.est.n(), t)?;
        let a = band.est.point(k);
        let b = band.est.point(k + 1);
        let normal = Vec2::new(-(b.q - a.q), b.p - a.p);
        let normal = if normal.norm() > 0.0 {
            normal
        } else {
            Vec2::new(-1.0, 1.0)
        };
        let sn = sigma * normal;
        let reach = sn * (radius / normal.dot(&sn).sqrt());
        upper.push(into_wedge(c + reach));
        lower.push(into_wedge(c - reach));
    }
    Ok(BandGeometry {
        ellipses,
        upper,
        lower,
    })
}

fn into_wedge(v: Vec2) -> CurvePoint {
    let p = v[0].clamp(0.0, 1.0);
    CurvePoint::new(p, v[1].clamp(0.0, p))
}

#[derive(Clone, Copy)]
enum Edge {
    Floor,
    Diagonal,
    Right,
}

impl Edge {
    /// Non-negative inside.
    fn eval(self, x: CurvePoint) -> f64 {
        match self {
            Edge::Floor => x.q,
            Edge::Diagonal => x.p - x.q,
            Edge::Right => 1.0 - x.p,
        }
    }

    fn snap(self, mut x: CurvePoint) -> CurvePoint {
        match self {
            Edge::Floor => x.q = 0.0,
            Edge::Diagonal => x.q = x.p,
            Edge::Right => x.p = 1.0,
        }
        x
    }
}

/// Sutherland-Hodgman clip of a polygon against `q ≥ 0`, `q ≤ p`, `p ≤ 1`.
pub fn clip_to_wedge(polygon: &[CurvePoint]) -> Vec<CurvePoint> {
    let mut out = polygon.to_vec();
    for edge in [Edge::Floor, Edge::Diagonal, Edge::Right] {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        for (i, &cur) in input.iter().enumerate() {
            let prev = input[(i + input.len() - 1) % input.len()];
            let (fc, fp) = (edge.eval(cur), edge.eval(prev));
            if fc >= 0.0 {
                if fp < 0.0 {
                    out.push(edge.snap(prev.lerp(cur, fp / (fp - fc))));
                }
                out.push(cur);
            } else if fp >= 0.0 {
                out.push(edge.snap(prev.lerp(cur, fp / (fp - fc))));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::tests::fixture;
    use crate::band::SigmaPath;
    use crate::band::{pcb_critical, BandKind};
    use crate::linearize::CovBlocks;
    use crate::lorenz::CurveEstimate;
    use crate::Mat2;

    fn tiny_band(center_on_diagonal: bool) -> Band {
        let s = Mat2::new(1e-4, 2e-5, 2e-5, 5e-5);
        let points = if center_on_diagonal {
            vec![
                CurvePoint::new(0.3, 0.3),
                CurvePoint::new(0.5, 0.5),
                CurvePoint::new(1.0, 1.0),
            ]
        } else {
            vec![
                CurvePoint::new(0.4, 0.2),
                CurvePoint::new(0.6, 0.35),
                CurvePoint::new(1.0, 1.0),
            ]
        };
        let est = CurveEstimate {
            points,
            size_hat: 1.0,
            total_hat: 1.0,
        };
        let blocks = CovBlocks {
            sigma: vec![s, s],
            cross: vec![s * 0.5],
        };
        Band::new(
            est,
            SigmaPath::new(blocks),
            BandKind::Pcb,
            0.05,
            pcb_critical(0.05).unwrap(),
            4,
        )
        .unwrap()
    }

    #[test]
    fn interior_ellipses_are_not_clipped() {
        let geo = band_geometry(&tiny_band(false), 32).unwrap();
        assert_eq!(geo.ellipses.len(), 5);
        assert!(geo.ellipses.iter().all(|e| e.len() == 32));
    }

    #[test]
    fn diagonal_ellipses_are_clipped() {
        let geo = band_geometry(&tiny_band(true), 64).unwrap();
        for e in &geo.ellipses {
            assert!(e.len() != 64);
            for v in e {
                assert!(v.q <= v.p + 1e-12 && v.q >= -1e-12 && v.p <= 1.0 + 1e-12);
            }
        }
        for v in geo.upper.iter().chain(&geo.lower) {
            assert!(v.q <= v.p && v.q >= 0.0);
        }
    }

    #[test]
    fn resolution_floor() {
        assert!(band_geometry(&tiny_band(false), 15).is_err());
    }

    #[test]
    fn scb_ellipses_contain_pcb_ellipses() {
        let (est, path) = fixture(10, 21);
        let pcb = Band::new(
            est,
            path,
            BandKind::Pcb,
            0.05,
            pcb_critical(0.05).unwrap(),
            8,
        )
        .unwrap();
        let scb = pcb.with_critical(BandKind::Scb, 9.5).unwrap();
        let geo = band_geometry(&pcb, 32).unwrap();
        for v in geo.ellipses.iter().flatten() {
            assert!(scb.contains(*v));
        }
    }

    #[test]
    fn clip_square() {
        let square = [
            CurvePoint::new(0.5, -0.5),
            CurvePoint::new(1.5, -0.5),
            CurvePoint::new(1.5, 0.5),
            CurvePoint::new(0.5, 0.5),
        ];
        let c = clip_to_wedge(&square);
        let area: f64 = (0..c.len())
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % c.len()]);
                a.p * b.q - b.p * a.q
            })
            .sum::<f64>()
            / 2.0;
        assert!((area.abs() - 0.5 * 0.5).abs() < 1e-12);
        assert!(clip_to_wedge(&[
            CurvePoint::new(2.0, 2.0),
            CurvePoint::new(3.0, 2.0),
            CurvePoint::new(3.0, 3.0)
        ])
        .is_empty());
    }
}
