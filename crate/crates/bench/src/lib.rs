//! Shared fixtures for the solver benchmarks.

use mwc::{minkowski_strip, reissner_nordstrom_intermediate, ConnectOptions, Problem, SpacetimeModel};

/// A model, an endpoint pair on it and a name for reports.
pub struct Fixture {
    pub name: &'static str,
    pub model: SpacetimeModel,
    pub problem: Problem,
}

pub fn strip() -> Fixture {
    Fixture {
        name: "strip",
        model: minkowski_strip(0.0, 1.0, 2).expect("builtin"),
        problem: Problem { tau0: 0.2, tau1: 0.8, l: vec![0.3, 0.1] },
    }
}

/// Sphere fiber with log-divergent line integrals at both ends.
pub fn reissner_nordstrom() -> Fixture {
    let half = std::f64::consts::FRAC_PI_2;
    Fixture {
        name: "reissner_nordstrom",
        model: reissner_nordstrom_intermediate(1.0, 0.6).expect("builtin"),
        problem: Problem { tau0: half, tau1: half + 0.3, l: vec![0.5, 0.8] },
    }
}

/// Coarse grid so one iteration stays well under a second.
pub fn coarse() -> ConnectOptions {
    ConnectOptions { k_steps: Some(33), c_steps: Some(33), ..ConnectOptions::default() }
}

pub const WARP_EXPRESSIONS: &[&str] = &[
    "1",
    "exp(2*t)",
    "sqrt(2/t - 1)",
    "cosh(t)^2",
    "(1 - 2/t + 0.36/t^2)^(-1/2) * sin(t)",
];
