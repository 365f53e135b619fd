//! Finite-population data: ingestion, synthetic generators and the
//! population Lorenz curve.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite population of non-negative incomes, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    y: Vec<f64>,
    total: f64,
}

impl Population {
    /// Sorts `incomes` and checks the population invariants.
    pub fn new(mut incomes: Vec<f64>) -> Result<Self> {
        if incomes.len() < 2 {
            return Err(Error::TooFewUnits(incomes.len()));
        }
        if let Some(&bad) = incomes.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite income {bad}")));
        }
        if let Some((i, &bad)) = incomes.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeIncome {
                line: i as u64 + 1,
                value: bad,
            });
        }
        incomes.sort_by(f64::total_cmp);
        let total: f64 = incomes.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        Ok(Population { y: incomes, total })
    }

    pub fn incomes(&self) -> &[f64] {
        &self.y
    }

    pub fn size(&self) -> usize {
        self.y.len()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Returns a copy with every income multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Population::new(self.y.iter().map(|v| v * factor).collect())
    }
}

/// A point of a Lorenz curve: population share `p`, income share `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p: f64,
    pub q: f64,
}

impl CurvePoint {
    pub const ORIGIN: CurvePoint = CurvePoint { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        CurvePoint { p, q }
    }

    pub fn lerp(self, other: CurvePoint, delta: f64) -> CurvePoint {
        CurvePoint {
            p: (1.0 - delta) * self.p + delta * other.p,
            q: (1.0 - delta) * self.q + delta * other.q,
        }
    }
}

/// Polyline through ordered curve points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCurve {
    pub points: Vec<CurvePoint>,
}

impl PiecewiseCurve {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        PiecewiseCurve { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Area under the polyline by the trapezoid rule.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].p - w[0].p) * (w[1].q + w[0].q) * 0.5)
            .sum()
    }
}

/// Reads incomes from the named column of a headed CSV file.
pub fn load_population(path: impl AsRef<Path>, column: &str) -> Result<Population> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_population(file, column)
}

/// Same as [`load_population`] for any reader.
pub fn read_population<R: std::io::Read>(reader: R, column: &str) -> Result<Population> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let idx = rdr
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;

    let mut incomes = Vec::new();
    for record in rdr.records() {
        let record = record?;
        // header is line 1
        let line = record.position().map_or(0, |p| p.line());
        let cell = record.get(idx).unwrap_or("");
        let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
            line,
            value: cell.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonNumeric {
                line,
                value: cell.to_string(),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeIncome { line, value });
        }
        incomes.push(value);
    }
    Population::new(incomes)
}

/// Synthetic population recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// `fraction` of the units share `share` of the total income equally;
    /// the remaining units share the rest equally.
    TwoClass {
        fraction: f64,
        share: f64,
        size: usize,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
        size: usize,
    },
}

/// Builds a population from `spec`. Deterministic for a fixed seed; the
/// two-class generator ignores the seed.
pub fn synthetic_population(spec: &GeneratorSpec, seed: u64) -> Result<Population> {
    match *spec {
        GeneratorSpec::TwoClass {
            fraction,
            share,
            size,
        } => {
            if size < 2 {
                return Err(Error::TooFewUnits(size));
            }
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::invalid(format!("fraction {fraction} not in (0,1)")));
            }
            if !(0.0..1.0).contains(&share) {
                return Err(Error::invalid(format!("share {share} not in [0,1)")));
            }
            let exact = fraction * size as f64;
            let lower = exact.round();
            if (exact - lower).abs() > 1e-9 || lower < 1.0 || lower >= size as f64 {
                return Err(Error::invalid(format!(
                    "fraction {fraction} of {size} units is not a whole number of units"
                )));
            }
            let lower = lower as usize;
            // total income equals the population size
            let total = size as f64;
            let low_income = share * total / lower as f64;
            let high_income = (1.0 - share) * total / (size - lower) as f64;
            let mut y = vec![low_income; lower];
            y.resize(size, high_income);
            Population::new(y)
        }
        GeneratorSpec::LogNormal { mu, sigma, size } => {
            if size < 2 {
                return Err(Error::TooFewUnits(size));
            }
            let dist = LogNormal::new(mu, sigma)
                .map_err(|e| Error::invalid(format!("lognormal({mu}, {sigma}): {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Population::new((0..size).map(|_| dist.sample(&mut rng)).collect())
        }
    }
}

/// The N+1 points `(N_k/N, Y_k/Y)` starting at the origin.
pub fn population_lorenz(pop: &Population) -> PiecewiseCurve {
    let n = pop.size() as f64;
    let total = pop.total();
    let mut points = Vec::with_capacity(pop.size() + 1);
    points.push(CurvePoint::ORIGIN);
    let mut partial = 0.0;
    for (k, &y) in pop.incomes().iter().enumerate() {
        partial += y;
        points.push(CurvePoint::new((k + 1) as f64 / n, partial / total));
    }
    // pin the last point against rounding drift
    if let Some(last) = points.last_mut() {
        *last = CurvePoint::new(1.0, 1.0);
    }
    PiecewiseCurve::new(points)
}

/// Twice the area between the diagonal and the curve.
pub fn gini(curve: &PiecewiseCurve) -> f64 {
    (1.0 - 2.0 * curve.area()).clamp(0.0, 1.0)
}
