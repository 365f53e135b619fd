//! Monte Carlo coverage experiments.
//!
//! Each replication draws an SRSWOR sample, builds the point-wise and the
//! simultaneous band from it and checks whether each band covers the
//! (trimmed) population Lorenz curve. Both bands share the same estimated
//! curve and covariance path, so coverage is decided from a single number
//! per replication: the largest, over the target points, of `min_t g(t, x)`.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{estimate_c, pcb_critical, scb_critical, Band, BandKind, BandOptions, SigmaPath};
use crate::design::{derive_seed, draw_srswor};
use crate::error::{Error, Result};
use crate::linearize::cov_blocks;
use crate::lorenz::estimate_points;
use crate::popdata::{
    load_population, population_lorenz, synthetic_population, CurvePoint, GeneratorSpec,
    PiecewiseCurve, Population,
};

/// Default cap on the number of target points checked per band.
pub const DEFAULT_CHECK_POINTS: usize = 5000;
/// Extra points per target segment before the cap kicks in.
const POINTS_PER_SEGMENT: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationSource {
    Synthetic { generator: GeneratorSpec, seed: u64 },
    Csv { path: PathBuf, column: String },
}

impl PopulationSource {
    pub fn load(&self) -> Result<Population> {
        match self {
            PopulationSource::Synthetic { generator, seed } => {
                synthetic_population(generator, *seed)
            }
            PopulationSource::Csv { path, column } => load_population(path, column),
        }
    }
}

fn default_check_points() -> usize {
    DEFAULT_CHECK_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub population: PopulationSource,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub alpha: f64,
    /// Fraction of the abscissa range dropped at each end of the target.
    pub trim: f64,
    pub seed: u64,
    #[serde(default)]
    pub grid: BandOptions,
    #[serde(default = "default_check_points")]
    pub check_points: usize,
}

impl ExperimentSpec {
    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..0.5).contains(&self.trim) {
            problems.push(format!("trim {} must be in [0, 0.5)", self.trim));
        }
        if self.replications < 1 {
            problems.push("replications must be at least 1".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push(format!("alpha {} must be in (0, 1)", self.alpha));
        }
        if self.sample_sizes.is_empty() {
            problems.push("sample_sizes must not be empty".to_string());
        }
        for &n in &self.sample_sizes {
            if n < 3 {
                problems.push(format!("sample size {n} must be at least 3"));
            }
        }
        if self.grid.mc_draws < 100 {
            problems.push(format!(
                "grid.mc_draws {} must be at least 100",
                self.grid.mc_draws
            ));
        }
        if self.grid.c_grid < 4 {
            problems.push(format!(
                "grid.c_grid {} must be at least 4",
                self.grid.c_grid
            ));
        }
        if self.grid.contains_grid < 1 {
            problems.push("grid.contains_grid must be at least 1".to_string());
        }
        if self.check_points < 2 {
            problems.push(format!(
                "check_points {} must be at least 2",
                self.check_points
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// The part of `curve` with abscissa in `[trim, 1 - trim]`, with
/// interpolated end points.
pub fn trim_curve(curve: &PiecewiseCurve, trim: f64) -> Result<PiecewiseCurve> {
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::invalid(format!("trim {trim} must be in [0, 0.5)")));
    }
    if trim == 0.0 {
        return Ok(curve.clone());
    }
    let (lo, hi) = (trim, 1.0 - trim);
    let at = |p: f64| -> CurvePoint {
        let i = curve.points.partition_point(|pt| pt.p < p);
        if i == 0 {
            return curve.points[0];
        }
        let (a, b) = (curve.points[i - 1], curve.points[i.min(curve.len() - 1)]);
        if b.p == a.p {
            return b;
        }
        CurvePoint::new(p, a.q + (b.q - a.q) * (p - a.p) / (b.p - a.p))
    };
    let mut points = vec![at(lo)];
    points.extend(curve.points.iter().filter(|pt| pt.p > lo && pt.p < hi));
    points.push(at(hi));
    Ok(PiecewiseCurve::new(points))
}

/// Vertices plus evenly spaced interior points per segment, at most
/// `cap` points. If the vertices alone exceed the cap, `cap` points evenly
/// spaced in abscissa are used instead.
pub fn check_points(target: &PiecewiseCurve, cap: usize) -> Vec<CurvePoint> {
    let pts = &target.points;
    if pts.len() <= 1 {
        return pts.clone();
    }
    let segments = pts.len() - 1;
    if pts.len() >= cap {
        let (lo, hi) = (pts[0].p, pts[segments].p);
        let mut j = 0;
        return (0..cap)
            .map(|i| {
                let p = lo + (hi - lo) * i as f64 / (cap - 1) as f64;
                while j + 1 < segments && pts[j + 1].p < p {
                    j += 1;
                }
                let (a, b) = (pts[j], pts[j + 1]);
                if b.p == a.p {
                    a
                } else {
                    a.lerp(b, ((p - a.p) / (b.p - a.p)).clamp(0.0, 1.0))
                }
            })
            .collect();
    }
    let extra = ((cap - pts.len()) / segments).min(POINTS_PER_SEGMENT);
    let mut out = Vec::with_capacity(pts.len() + segments * extra);
    for w in pts.windows(2) {
        out.push(w[0]);
        for j in 1..=extra {
            out.push(w[0].lerp(w[1], j as f64 / (extra + 1) as f64));
        }
    }
    out.push(pts[segments]);
    out
}

/// Largest `min_t g(t, x)` over the points.
pub fn worst_g(band: &Band, points: &[CurvePoint]) -> f64 {
    points.iter().map(|&x| band.min_g(x).0).fold(0.0, f64::max)
}

/// Whether every check point of `target` lies inside the band.
pub fn curve_covered(band: &Band, target: &PiecewiseCurve, check_grid: usize) -> Result<bool> {
    if target.is_empty() {
        return Err(Error::invalid("empty target curve"));
    }
    Ok(check_points(target, check_grid)
        .into_iter()
        .all(|x| band.contains(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationOutcome {
    pub n: usize,
    pub replication: usize,
    pub davies_c: f64,
    pub u_alpha: f64,
    pub worst_g: f64,
    pub pcb_covered: bool,
    pub scb_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCell {
    pub n: usize,
    pub kind: BandKind,
    pub rate: f64,
    pub std_error: f64,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub mean_u_alpha: f64,
    pub mean_davies_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub alpha: f64,
    pub trim: f64,
    pub replications: usize,
    pub d_alpha: f64,
    pub cells: Vec<CoverageCell>,
    pub sizes: Vec<SizeSummary>,
}

impl CoverageReport {
    pub fn cell(&self, n: usize, kind: BandKind) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.n == n && c.kind == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One replication: sample, estimate, covariance, `C`, `u_α`, coverage.
pub fn run_replication(
    pop: &Population,
    targets: &[CurvePoint],
    spec: &ExperimentSpec,
    n: usize,
    replication: usize,
) -> Result<ReplicationOutcome> {
    let tags = [n as u64, replication as u64];
    let sample = draw_srswor(pop, n, derive_seed(spec.seed, &[tags[0], tags[1], 0]))?;
    let est = estimate_points(&sample)?;
    let path = SigmaPath::new(cov_blocks(&sample, &est)?);
    let c = estimate_c(
        &path,
        &est,
        spec.grid.mc_draws,
        spec.grid.c_grid,
        derive_seed(spec.seed, &[tags[0], tags[1], 1]),
    )?;
    let d_alpha = pcb_critical(spec.alpha)?;
    let u_alpha = scb_critical(c.value, spec.alpha)?;
    let band = Band::new(
        est,
        path,
        BandKind::Scb,
        spec.alpha,
        u_alpha,
        spec.grid.contains_grid,
    )?;
    let worst = worst_g(&band, targets);
    let pcb_covered = worst < d_alpha;
    let scb_covered = worst < u_alpha;
    // nesting: PCB coverage implies SCB coverage
    debug_assert!(!pcb_covered || scb_covered);
    Ok(ReplicationOutcome {
        n,
        replication,
        davies_c: c.value,
        u_alpha,
        worst_g: worst,
        pcb_covered,
        scb_covered,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<CoverageReport> {
    spec.validate()?;
    let pop = spec.population.load()?;
    run_experiment_on(&pop, spec)
}

/// Runs all replications (in parallel) on an already loaded population.
pub fn run_experiment_on(pop: &Population, spec: &ExperimentSpec) -> Result<CoverageReport> {
    spec.validate()?;
    for &n in &spec.sample_sizes {
        if n > pop.size() {
            return Err(Error::Config(vec![format!(
                "sample size {n} exceeds population size {}",
                pop.size()
            )]));
        }
    }
    let target = trim_curve(&population_lorenz(pop), spec.trim)?;
    let targets = check_points(&target, spec.check_points);

    let tasks: Vec<(usize, usize)> = spec
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..spec.replications).map(move |r| (n, r)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(n, r)| {
            run_replication(pop, &targets, spec, n, r).map_err(|e| Error::Replication {
                replication: r,
                n,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(spec, &outcomes))
}

fn aggregate(spec: &ExperimentSpec, outcomes: &[ReplicationOutcome]) -> CoverageReport {
    let mut cells = Vec::new();
    let mut sizes = Vec::new();
    for &n in &spec.sample_sizes {
        let runs: Vec<&ReplicationOutcome> = outcomes.iter().filter(|o| o.n == n).collect();
        let r = runs.len() as f64;
        for kind in [BandKind::Pcb, BandKind::Scb] {
            let covered: Vec<bool> = runs
                .iter()
                .map(|o| match kind {
                    BandKind::Pcb => o.pcb_covered,
                    BandKind::Scb => o.scb_covered,
                })
                .collect();
            let rate = covered.iter().filter(|&&c| c).count() as f64 / r;
            cells.push(CoverageCell {
                n,
                kind,
                rate,
                std_error: (rate * (1.0 - rate) / r).sqrt(),
                covered,
            });
        }
        sizes.push(SizeSummary {
            n,
            mean_u_alpha: runs.iter().map(|o| o.u_alpha).sum::<f64>() / r,
            mean_davies_c: runs.iter().map(|o| o.davies_c).sum::<f64>() / r,
        });
    }
    CoverageReport {
        alpha: spec.alpha,
        trim: spec.trim,
        replications: spec.replications,
        d_alpha: -2.0 * spec.alpha.ln(),
        cells,
        sizes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

/// Coverage rates with one row per band kind and one column per sample size.
pub fn report_to_table(report: &CoverageReport, format: TableFormat) -> String {
    let sizes: Vec<usize> = report.sizes.iter().map(|s| s.n).collect();
    let rate = |n, kind| report.cell(n, kind).map_or(f64::NAN, |c| c.rate);
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("band");
            for n in &sizes {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
            for kind in [BandKind::Pcb, BandKind::Scb] {
                out.push_str(kind.label());
                for &n in &sizes {
                    let _ = write!(out, ",{:.3}", rate(n, kind));
                }
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let _ = write!(out, "{:<6}", "n");
            for n in &sizes {
                let _ = write!(out, "{n:>8}");
            }
            out.push('\n');
            for kind in [BandKind::Pcb, BandKind::Scb] {
                let _ = write!(out, "{:<6}", kind.label());
                for &n in &sizes {
                    let _ = write!(out, "{:>8.3}", rate(n, kind));
                }
                out.push('\n');
            }
        }
    }
    out
}
