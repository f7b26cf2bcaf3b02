//! Causal connections along the base direction, τ-constant geodesics, and the
//! endpoint-divergence conditions that guarantee geodesic connectedness.

mod conditions;
mod system;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SpacetimeModel, MAX_FACTORS};
use crate::quad::{CoefficientVector, QuadError, DEGENERATE_SLOPE};

pub use conditions::{check_conditions, check_line_reachability, ConditionFailure, ConditionReport};
pub use system::{feasible_causal, solve_causal_system, CausalSystemSolution};

/// `|D|` below this counts as lightlike.
pub const LIGHTLIKE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CausalError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no causal connection: the causal inequalities are infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<ModelError> for CausalError {
    fn from(e: ModelError) -> Self {
        CausalError::Quad(QuadError::Model(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalKind {
    Timelike,
    Lightlike,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalClass {
    pub kind: CausalKind,
    pub witness: Option<CausalSystemSolution>,
}

/// Causal character of the pair `(τ₀, x) → (τ₀′, x′)` with fiber distances `l`,
/// for `τ₀ ≤ τ₀′` (future direction).
pub fn classify_causal(model: &SpacetimeModel, tau0: f64, tau1: f64, l: &[f64]) -> Result<CausalClass, CausalError> {
    if tau0 > tau1 {
        return Err(CausalError::Precondition(format!("τ₀ = {tau0} exceeds τ₀′ = {tau1}")));
    }
    let none = CausalClass {
        kind: CausalKind::None,
        witness: None,
    };
    if l.iter().all(|x| *x == 0.0) {
        if tau0 == tau1 {
            return Ok(none);
        }
        // Pure base segment τ(t) = τ₀ + Δτ·t.
        let dt = tau1 - tau0;
        return Ok(CausalClass {
            kind: CausalKind::Timelike,
            witness: Some(CausalSystemSolution {
                c_prime: CoefficientVector {
                    c: vec![0.0; model.n()],
                    k: 0.0,
                },
                d: -dt * dt,
                residuals: vec![0.0; model.n()],
            }),
        });
    }
    if tau0 == tau1 {
        return Ok(none);
    }
    if feasible_causal(model, tau0, tau1, l)?.is_none() {
        return Ok(none);
    }
    let sol = match solve_causal_system(model, tau0, tau1, 1.0, &|_| 0.0, l) {
        Ok(s) => s,
        Err(CausalError::Infeasible) => return Ok(none),
        Err(e) => return Err(e),
    };
    let kind = if sol.d < -LIGHTLIKE_TOL {
        CausalKind::Timelike
    } else {
        // Lightlike needs equality exactly where the coefficient is positive.
        let pattern = (0..l.len()).all(|j| (sol.c_prime.c[j] == 0.0) == (l[j] == 0.0));
        if !pattern {
            return Err(CausalError::Numerical("lightlike solution breaks the equality pattern".into()));
        }
        CausalKind::Lightlike
    };
    Ok(CausalClass {
        kind,
        witness: Some(sol),
    })
}

/// Coefficients of the geodesic staying at τ₀ while covering fiber distances
/// `l`, when τ₀ is a critical point of the resulting `f^ĉ`.
pub fn tau_constant_geodesic(model: &SpacetimeModel, tau0: f64, l: &[f64]) -> Result<Option<Vec<f64>>, CausalError> {
    let n = model.n();
    if l.len() != n || l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || l.iter().all(|x| *x == 0.0) {
        return Err(CausalError::Precondition("need nonnegative fiber lengths, some positive".into()));
    }
    let mut v = [0.0; MAX_FACTORS];
    let mut d = [0.0; MAX_FACTORS];
    model.eval_into(tau0, &mut v[..n], &mut d[..n])?;
    let weights: Vec<f64> = (0..n).map(|i| v[i].powi(4) * l[i] * l[i]).collect();
    let total: f64 = weights.iter().sum();
    let c: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let f: f64 = (0..n).map(|i| c[i] / (v[i] * v[i])).sum();
    let df: f64 = (0..n).map(|i| -2.0 * c[i] * d[i] / v[i].powi(3)).sum();
    Ok((df.abs() <= DEGENERATE_SLOPE * f.abs().max(1.0)).then_some(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{de_sitter_grw, minkowski_strip};

    #[test]
    fn classify_examples() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        assert_eq!(classify_causal(&m, 0.0, 2.0, &[1.0, 1.0]).unwrap().kind, CausalKind::Timelike);
        let light = classify_causal(&m, 0.0, 2f64.sqrt(), &[1.0, 1.0]).unwrap();
        assert_eq!(light.kind, CausalKind::Lightlike);
        assert!(light.witness.unwrap().d.abs() <= LIGHTLIKE_TOL);
        assert_eq!(classify_causal(&m, 0.0, 1.0, &[1.0, 1.0]).unwrap().kind, CausalKind::None);
    }

    #[test]
    fn tau_constant_examples() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let c = tau_constant_geodesic(&m, 0.3, &[3.0, 4.0]).unwrap().unwrap();
        assert!((c[0] - 9.0 / 25.0).abs() < 1e-15 && (c[1] - 16.0 / 25.0).abs() < 1e-15);
        let ds = de_sitter_grw().unwrap();
        assert_eq!(tau_constant_geodesic(&ds, 0.0, &[1.0]).unwrap(), Some(vec![1.0]));
        assert_eq!(tau_constant_geodesic(&ds, 1.0, &[1.0]).unwrap(), None);
    }
}
