//! Shared fixtures for the criterion benches.

use lorenz_scb::design::draw_srswor;
use lorenz_scb::linearize::cov_blocks;
use lorenz_scb::lorenz::estimate_points;
use lorenz_scb::popdata::{synthetic_population, GeneratorSpec};
use lorenz_scb::{CurveEstimate, Population, SampleDraw, SigmaPath};

pub fn population(size: usize) -> Population {
    synthetic_population(
        &GeneratorSpec::LogNormal {
            mu: 0.0,
            sigma: 0.8,
            size,
        },
        17,
    )
    .expect("valid generator")
}

pub fn sample(pop: &Population, n: usize) -> (SampleDraw, CurveEstimate, SigmaPath) {
    let s = draw_srswor(pop, n, 5).expect("valid sample size");
    let est = estimate_points(&s).expect("positive total");
    let path = SigmaPath::new(cov_blocks(&s, &est).expect("n >= 3"));
    (s, est, path)
}
