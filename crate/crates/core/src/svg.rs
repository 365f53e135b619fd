//! SVG rendering on the unit square.
//!
//! The viewport is the unit square with a 5% margin on each side. Curves
//! and band envelopes are `<path>` elements (one per curve); ellipses are
//! `<polygon>` elements; the frame and diagonal are `<rect>` and `<line>`.

use std::fmt::Write as _;

use crate::band::BandGeometry;
use crate::popdata::{CurvePoint, PiecewiseCurve};

const SIZE_PX: u32 = 600;
const MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct Style<'a> {
    pub stroke: &'a str,
    pub width: f64,
}

const POPULATION: Style<'static> = Style {
    stroke: "#c0392b",
    width: 0.004,
};
const ESTIMATE: Style<'static> = Style {
    stroke: "#000000",
    width: 0.004,
};
const ENVELOPE: Style<'static> = Style {
    stroke: "#1f4fd1",
    width: 0.003,
};

/// Incremental SVG document.
#[derive(Debug, Clone)]
pub struct Figure {
    body: String,
}

impl Default for Figure {
    fn default() -> Self {
        Self::new()
    }
}

impl Figure {
    pub fn new() -> Self {
        let mut body = String::new();
        let lo = -MARGIN;
        let span = 1.0 + 2.0 * MARGIN;
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE_PX}" height="{SIZE_PX}" viewBox="{lo} {lo} {span} {span}">"#
        );
        body.push_str(
            "<rect x=\"0\" y=\"0\" width=\"1\" height=\"1\" fill=\"none\" stroke=\"#888888\" stroke-width=\"0.002\"/>\n",
        );
        body.push_str(
            "<line x1=\"0\" y1=\"1\" x2=\"1\" y2=\"0\" stroke=\"#888888\" stroke-width=\"0.002\" stroke-dasharray=\"0.01 0.01\"/>\n",
        );
        Figure { body }
    }

    pub fn path(&mut self, id: &str, points: &[CurvePoint], style: Style<'_>) -> &mut Self {
        if points.is_empty() {
            return self;
        }
        let mut d = String::new();
        for (i, pt) in points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.6},{:.6}",
                if i == 0 { "M" } else { " L" },
                pt.p,
                1.0 - pt.q
            );
        }
        let _ = writeln!(
            self.body,
            r#"<path id="{id}" d="{d}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            style.stroke, style.width
        );
        self
    }

    pub fn polygons(&mut self, polys: &[Vec<CurvePoint>]) -> &mut Self {
        self.body.push_str(
            "<g id=\"ellipses\" fill=\"#999999\" fill-opacity=\"0.15\" stroke=\"none\">\n",
        );
        for poly in polys {
            self.body.push_str("<polygon points=\"");
            for (i, pt) in poly.iter().enumerate() {
                let _ = write!(
                    self.body,
                    "{}{:.6},{:.6}",
                    if i == 0 { "" } else { " " },
                    pt.p,
                    1.0 - pt.q
                );
            }
            self.body.push_str("\"/>\n");
        }
        self.body.push_str("</g>\n");
        self
    }

    pub fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Population (or any) Lorenz curve on the unit square.
pub fn curve_svg(curve: &PiecewiseCurve) -> String {
    let mut fig = Figure::new();
    fig.path("curve", &curve.points, ESTIMATE);
    fig.finish()
}

/// Band figure: ellipses, envelopes, the estimated curve and optionally the
/// population curve.
pub fn band_svg(
    geometry: &BandGeometry,
    estimate: &[CurvePoint],
    population: Option<&PiecewiseCurve>,
) -> String {
    let mut fig = Figure::new();
    fig.polygons(&geometry.ellipses);
    fig.path("upper-envelope", &geometry.upper, ENVELOPE);
    fig.path("lower-envelope", &geometry.lower, ENVELOPE);
    if let Some(pop) = population {
        fig.path("population", &pop.points, POPULATION);
    }
    fig.path("estimate", estimate, ESTIMATE);
    fig.finish()
}

/// Checks that `doc` is well-formed markup (balanced elements, quoted
/// attributes) and returns the element names in document order.
pub fn element_names(doc: &str) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    let mut open: Vec<String> = Vec::new();
    let mut rest = doc;
    while let Some(start) = rest.find('<') {
        let after = &rest[start + 1..];
        let end = after.find('>').ok_or("unterminated tag")?;
        let tag = &after[..end];
        rest = &after[end + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            match open.pop() {
                Some(top) if top == name.trim() => {}
                other => return Err(format!("closing </{name}> does not match {other:?}")),
            }
            continue;
        }
        let self_closing = tag.ends_with('/');
        let body = tag.trim_end_matches('/');
        let name = body
            .split_whitespace()
            .next()
            .ok_or("empty tag")?
            .to_string();
        if !body.matches('"').count().is_multiple_of(2) {
            return Err(format!("unbalanced quotes in <{name}>"));
        }
        names.push(name.clone());
        if !self_closing {
            open.push(name);
        }
    }
    if !open.is_empty() {
        return Err(format!("unclosed elements {open:?}"));
    }
    if !rest.trim().is_empty() {
        return Err("trailing text after root".to_string());
    }
    Ok(names)
}
