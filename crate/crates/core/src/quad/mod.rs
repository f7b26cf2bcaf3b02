//! Fiber-progress integrals `√cᵢ ∫ fᵢ⁻² (f^ĉ − D)^{-1/2} dτ`.
//!
//! `f^ĉ = Σ cⱼ / fⱼ²` acts as the potential of the τ-motion: along a geodesic
//! with first integral `D`, `τ'² = f^ĉ(τ) − D`. Turning points are the zeros of
//! `f^ĉ − D`; the integrals are singular there and at the interval ends.

mod improper;
mod path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{End, ModelError, NormalizationMap, SpacetimeModel, MAX_FACTORS};
use crate::numeric::{brent, Vals};

pub(crate) use improper::{potential_limit, PotentialLimit};
pub use improper::{improper_diverges, numeric_divergence, Divergence};
pub use path::{bounce_all, bounce_integrate, h_segment, BounceOutcome, BounceResult, Itinerary};
pub(crate) use path::bounce_with;

/// Grid size of the turning-point scan on each side of τ₀.
pub const SCAN_POINTS: usize = 1024;
/// Scan stops this far (in normalized coordinate) from ±1.
pub const SCAN_EDGE: f64 = 1e-9;
/// Relative threshold on `|d f^ĉ/dτ|` below which a turning point is degenerate.
pub const DEGENERATE_SLOPE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate start: τ₀ is a critical point of f^ĉ with D = f^ĉ(τ₀)")]
    DegenerateStart,
    #[error("path reaches the interval end {end} after covering {covered} < target")]
    Fake { end: End, covered: f64 },
    #[error("integrand undefined inside the segment: {0}")]
    Bracketing(String),
    #[error("integral diverges at {0}")]
    Diverged(f64),
    #[error("factor {factor} has no declared asymptote at {end}")]
    MissingAsymptote { factor: usize, end: End },
}

/// Nonnegative coefficients `ĉ` with their sum `k` carried explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub c: Vec<f64>,
    pub k: f64,
}

impl CoefficientVector {
    pub fn new(c: Vec<f64>) -> Result<CoefficientVector, QuadError> {
        if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(QuadError::Precondition("coefficients must be finite and nonnegative".into()));
        }
        let k: f64 = c.iter().sum();
        if !(k > 0.0 && k <= 1.0 + 1e-12) {
            return Err(QuadError::Precondition(format!("coefficient sum {k} is outside (0, 1]")));
        }
        Ok(CoefficientVector { c, k })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivClass {
    DerivPos,
    DerivNeg,
    DerivZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningData {
    #[serde(with = "crate::model::ext_real")]
    pub a_star: f64,
    #[serde(with = "crate::model::ext_real")]
    pub b_star: f64,
    pub class_at_tau0: DerivClass,
    pub degenerate_a: bool,
    pub degenerate_b: bool,
}

/// One evaluation of the potential and the per-factor weights `1/fᵢ²`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PotentialPoint {
    pub f: f64,
    pub df: f64,
    pub inv_f2: Vals,
}

/// `f^ĉ` for a fixed model and coefficient vector.
#[derive(Debug, Clone)]
pub(crate) struct Potential<'m> {
    pub model: &'m SpacetimeModel,
    pub c: Vals,
    pub sqrt_c: Vals,
    pub n: usize,
}

impl<'m> Potential<'m> {
    pub fn new(model: &'m SpacetimeModel, c: &[f64]) -> Result<Self, QuadError> {
        let n = model.n();
        if c.len() != n {
            return Err(QuadError::Precondition(format!(
                "expected {n} coefficients, got {}",
                c.len()
            )));
        }
        if c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || c.iter().all(|x| *x == 0.0) {
            return Err(QuadError::Precondition("coefficients must be nonnegative and not all zero".into()));
        }
        let mut cv = [0.0; MAX_FACTORS];
        let mut sc = [0.0; MAX_FACTORS];
        for i in 0..n {
            cv[i] = c[i];
            sc[i] = c[i].sqrt();
        }
        Ok(Potential {
            model,
            c: cv,
            sqrt_c: sc,
            n,
        })
    }

    pub fn point(&self, tau: f64) -> Result<PotentialPoint, ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut d = [0.0; MAX_FACTORS];
        self.model.eval_into(tau, &mut v, &mut d)?;
        let mut inv_f2 = [0.0; MAX_FACTORS];
        let (mut f, mut df) = (0.0, 0.0);
        for i in 0..self.n {
            let w = 1.0 / (v[i] * v[i]);
            inv_f2[i] = w;
            f += self.c[i] * w;
            df -= 2.0 * self.c[i] * d[i] * w / v[i];
        }
        Ok(PotentialPoint { f, df, inv_f2 })
    }

    pub fn value(&self, tau: f64) -> Result<f64, ModelError> {
        Ok(self.point(tau)?.f)
    }
}

/// `f^ĉ(τ) = Σ cᵢ / fᵢ²(τ)`.
pub fn f_hat(model: &SpacetimeModel, c: &[f64], tau: f64) -> Result<f64, QuadError> {
    Ok(Potential::new(model, c)?.value(tau)?)
}

/// `d f^ĉ/dτ = −2 Σ cᵢ fᵢ′ / fᵢ³`.
pub fn f_hat_deriv(model: &SpacetimeModel, c: &[f64], tau: f64) -> Result<f64, QuadError> {
    Ok(Potential::new(model, c)?.point(tau)?.df)
}

/// Samples of `f^ĉ` on the scan grid on both sides of τ₀. Reusable for any `D`.
#[derive(Debug, Clone)]
pub(crate) struct ScanGrid {
    pub tau0: f64,
    pub f0: f64,
    pub df0: f64,
    /// Increasing away from τ₀: (τ, f^ĉ(τ)).
    pub up: Vec<(f64, f64)>,
    pub down: Vec<(f64, f64)>,
    /// Running minima of `f^ĉ` along `up` and `down`, for locating the first
    /// sample at or below a given `D` by bisection.
    up_min: Vec<f64>,
    down_min: Vec<f64>,
}

fn running_min(side: &[(f64, f64)]) -> Vec<f64> {
    side.iter()
        .scan(f64::INFINITY, |m, &(_, f)| {
            *m = m.min(f);
            Some(*m)
        })
        .collect()
}

/// Scan abscissae on both sides of τ₀ with the weights `1/fᵢ²` there. They do
/// not depend on `ĉ`, so one basis serves every coefficient vector.
#[derive(Debug, Clone)]
pub(crate) struct ScanBasis {
    tau0: f64,
    up: Vec<(f64, Vals)>,
    down: Vec<(f64, Vals)>,
}

impl ScanBasis {
    pub fn new(model: &SpacetimeModel, tau0: f64) -> Result<ScanBasis, QuadError> {
        let iv = model.interval;
        let n = model.n();
        let phi = NormalizationMap::new(&iv, tau0);
        let x0 = phi.forward(tau0);
        let side = |target: f64| -> Result<Vec<(f64, Vals)>, QuadError> {
            let mut out = Vec::with_capacity(SCAN_POINTS);
            let mut last = tau0;
            let mut v = [0.0; MAX_FACTORS];
            let mut d = [0.0; MAX_FACTORS];
            for k in 1..=SCAN_POINTS {
                let x = x0 + (target - x0) * k as f64 / SCAN_POINTS as f64;
                let tau = phi.inverse(x);
                if !iv.contains(tau) || tau == last {
                    continue;
                }
                last = tau;
                model.eval_into(tau, &mut v[..n], &mut d[..n])?;
                let mut w = [0.0; MAX_FACTORS];
                for i in 0..n {
                    w[i] = 1.0 / (v[i] * v[i]);
                }
                out.push((tau, w));
            }
            Ok(out)
        };
        Ok(ScanBasis {
            tau0,
            up: side(1.0 - SCAN_EDGE)?,
            down: side(-1.0 + SCAN_EDGE)?,
        })
    }
}

impl ScanGrid {
    pub fn new(pot: &Potential<'_>, tau0: f64) -> Result<ScanGrid, QuadError> {
        ScanGrid::from_basis(&ScanBasis::new(pot.model, tau0)?, pot)
    }

    pub fn from_basis(basis: &ScanBasis, pot: &Potential<'_>) -> Result<ScanGrid, QuadError> {
        let p0 = pot.point(basis.tau0)?;
        let side = |pts: &[(f64, Vals)]| -> Vec<(f64, f64)> {
            pts.iter()
                .map(|(tau, w)| {
                    let mut f = 0.0;
                    for i in 0..pot.n {
                        f += pot.c[i] * w[i];
                    }
                    (*tau, f)
                })
                .collect()
        };
        let up = side(&basis.up);
        let down = side(&basis.down);
        Ok(ScanGrid {
            tau0: basis.tau0,
            f0: p0.f,
            df0: p0.df,
            up_min: running_min(&up),
            down_min: running_min(&down),
            up,
            down,
        })
    }

    /// Turning data for first integral `d`, per the three-case rule at τ₀.
    pub fn turning(&self, pot: &Potential<'_>, d: f64) -> Result<TurningData, QuadError> {
        let scale = 1f64.max(self.f0.abs()).max(d.abs());
        let g0 = self.f0 - d;
        if g0 < -1e-12 * scale {
            return Err(QuadError::Precondition(format!(
                "D = {d} exceeds f^ĉ(τ₀) = {}",
                self.f0
            )));
        }
        let class = if self.df0.abs() <= DEGENERATE_SLOPE * scale {
            DerivClass::DerivZero
        } else if self.df0 > 0.0 {
            DerivClass::DerivPos
        } else {
            DerivClass::DerivNeg
        };
        let iv = pot.model.interval;
        let at_root = g0 <= 1e-12 * scale;
        let find = |side: &[(f64, f64)], mins: &[f64]| -> Result<Option<(f64, bool)>, QuadError> {
            let k = mins.partition_point(|m| m - d > 0.0);
            if k == side.len() {
                return Ok(None);
            }
            let prev = if k == 0 { (self.tau0, g0) } else { (side[k - 1].0, side[k - 1].1 - d) };
            let root = if prev.1 <= 0.0 {
                prev.0
            } else {
                brent(|t| pot.value(t).map(|v| v - d), prev.0, side[k].0, 0.0, 200)?
            };
            let slope = pot.point(root)?.df;
            Ok(Some((root, slope.abs() <= DEGENERATE_SLOPE * scale)))
        };
        let upper = || -> Result<(f64, bool), QuadError> { Ok(find(&self.up, &self.up_min)?.unwrap_or((iv.b, false))) };
        let lower =
            || -> Result<(f64, bool), QuadError> { Ok(find(&self.down, &self.down_min)?.unwrap_or((iv.a, false))) };
        let ((a_star, degenerate_a), (b_star, degenerate_b)) = if at_root {
            match class {
                DerivClass::DerivPos => ((self.tau0, false), upper()?),
                DerivClass::DerivNeg => (lower()?, (self.tau0, false)),
                DerivClass::DerivZero => ((self.tau0, true), (self.tau0, true)),
            }
        } else {
            (lower()?, upper()?)
        };
        Ok(TurningData {
            a_star,
            b_star,
            class_at_tau0: class,
            degenerate_a,
            degenerate_b,
        })
    }
}

/// Nearest turning points `a★ ≤ τ₀ ≤ b★` of the motion with first integral `d`.
pub fn turning_points(model: &SpacetimeModel, c: &[f64], d: f64, tau0: f64) -> Result<TurningData, QuadError> {
    let pot = Potential::new(model, c)?;
    ScanGrid::new(&pot, tau0)?.turning(&pot, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{de_sitter_grw, minkowski_strip, schwarzschild_interior};

    #[test]
    fn f_hat_examples() {
        let strip = minkowski_strip(0.0, 1.0, 2).unwrap();
        assert_eq!(f_hat(&strip, &[0.5, 0.5], 0.3).unwrap(), 1.0);
        let ds = de_sitter_grw().unwrap();
        assert_eq!(f_hat(&ds, &[1.0], 0.0).unwrap(), 1.0);
        let sech = 1.0 / 1f64.cosh();
        assert!((f_hat(&ds, &[1.0], 1.0).unwrap() - sech * sech).abs() < 1e-15);
        assert!((f_hat(&ds, &[1.0], 1.0).unwrap() - 0.419_974_341_614_026_1).abs() < 1e-12);
        assert!(f_hat(&strip, &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn f_hat_derivative_matches_finite_difference() {
        let s = schwarzschild_interior(1.0).unwrap();
        let c = [0.3, 0.7];
        for k in 1..50 {
            let tau = PI_M * k as f64 / 50.0;
            let h = 1e-6;
            let fd = (f_hat(&s, &c, tau + h).unwrap() - f_hat(&s, &c, tau - h).unwrap()) / (2.0 * h);
            let d = f_hat_deriv(&s, &c, tau).unwrap();
            assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "τ={tau}");
        }
    }
    const PI_M: f64 = std::f64::consts::PI;

    #[test]
    fn turning_point_examples() {
        let ds = de_sitter_grw().unwrap();
        let s1 = (1.0 / 1f64.cosh()).powi(2);
        let t = turning_points(&ds, &[1.0], s1, 0.0).unwrap();
        assert!((t.a_star + 1.0).abs() < 1e-12 && (t.b_star - 1.0).abs() < 1e-12);
        assert!(!t.degenerate_a && !t.degenerate_b);
        let strip = minkowski_strip(0.0, 1.0, 2).unwrap();
        let t = turning_points(&strip, &[0.4, 0.6], 0.0, 0.3).unwrap();
        assert_eq!((t.a_star, t.b_star), (0.0, 1.0));
        assert_eq!(t.class_at_tau0, DerivClass::DerivZero);
        let t = turning_points(&ds, &[1.0], 1.0, 0.0).unwrap();
        assert_eq!((t.a_star, t.b_star, t.class_at_tau0), (0.0, 0.0, DerivClass::DerivZero));
        assert!(turning_points(&ds, &[1.0], 1.5, 0.0).is_err());
    }

    #[test]
    fn turning_from_a_root_follows_the_slope() {
        let ds = de_sitter_grw().unwrap();
        // τ₀ = 0.5 with D = f^ĉ(τ₀): the potential decreases, so motion goes down to the mirror root.
        let d = (1.0 / 0.5f64.cosh()).powi(2);
        let t = turning_points(&ds, &[1.0], d, 0.5).unwrap();
        assert_eq!(t.class_at_tau0, DerivClass::DerivNeg);
        assert_eq!(t.b_star, 0.5);
        assert!((t.a_star + 0.5).abs() < 1e-12);
    }
}
