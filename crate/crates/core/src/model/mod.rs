//! Spacetime models `I × F₁ × … × Fₙ` with metric `−dτ² + Σ fᵢ² gᵢ`.
//!
//! A model bundles the base interval, one warping function per factor (value
//! and derivative, evaluated jointly for speed), the declared endpoint
//! asymptotics of each warp, and a descriptor of each fiber.

mod catalog;
mod io;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcparse::{differentiate, EvalError, Expr};

pub use catalog::{
    catalog_entries, de_sitter_grw, minkowski_strip, reissner_nordstrom_intermediate,
    schwarzschild_interior, CatalogEntry,
};
pub use io::{ext_real, model_from_json, model_from_str, model_to_json};

/// Upper bound on the number of factors; evaluation uses fixed stack buffers.
pub const MAX_FACTORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("τ = {tau} is outside the open interval ({a}, {b})")]
    Domain { tau: f64, a: f64, b: f64 },
    #[error("warp {factor}: {source}")]
    Eval { factor: usize, source: EvalError },
    #[error("warp {factor} is not positive at τ = {tau}")]
    NonPositive { factor: usize, tau: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

/// Which end of the base interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    A,
    B,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::A => End::B,
            End::B => End::A,
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            End::A => "a",
            End::B => "b",
        })
    }
}

/// Open interval `(a, b)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_real")]
    pub a: f64,
    #[serde(with = "ext_real")]
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Interval, ModelError> {
        let representable = if a.is_finite() && b.is_finite() {
            a + (b - a) * 0.5 > a && a + (b - a) * 0.5 < b
        } else {
            true
        };
        if a.is_nan() || b.is_nan() || a >= b || a == f64::INFINITY || b == f64::NEG_INFINITY || !representable {
            return Err(ModelError::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn contains(&self, tau: f64) -> bool {
        tau > self.a && tau < self.b
    }

    pub fn endpoint(&self, end: End) -> f64 {
        match end {
            End::A => self.a,
            End::B => self.b,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// A representative interior point.
    pub fn center(&self) -> f64 {
        match (self.a.is_finite(), self.b.is_finite()) {
            (true, true) => 0.5 * (self.a + self.b),
            (true, false) => self.a + 1.0,
            (false, true) => self.b - 1.0,
            (false, false) => 0.0,
        }
    }
}

/// Diffeomorphism of the base interval onto `(−1, 1)`: affine when both ends
/// are finite, a `tanh` squashing otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalizationMap {
    Affine { a: f64, b: f64 },
    Tanh { sigma: f64 },
    /// `(a, +∞)`.
    OpenAbove { a: f64, sigma: f64 },
    /// `(−∞, b)`.
    OpenBelow { b: f64, sigma: f64 },
}

impl NormalizationMap {
    pub fn new(interval: &Interval, tau0: f64) -> NormalizationMap {
        match (interval.a.is_finite(), interval.b.is_finite()) {
            (true, true) => NormalizationMap::Affine {
                a: interval.a,
                b: interval.b,
            },
            (false, false) => NormalizationMap::Tanh {
                sigma: tau0.abs().max(1.0),
            },
            (true, false) => NormalizationMap::OpenAbove {
                a: interval.a,
                sigma: (tau0 - interval.a).abs().max(1.0),
            },
            (false, true) => NormalizationMap::OpenBelow {
                b: interval.b,
                sigma: (interval.b - tau0).abs().max(1.0),
            },
        }
    }

    pub fn forward(&self, tau: f64) -> f64 {
        match *self {
            NormalizationMap::Affine { a, b } => {
                if tau <= a {
                    -1.0
                } else if tau >= b {
                    1.0
                } else {
                    (2.0 * tau - a - b) / (b - a)
                }
            }
            NormalizationMap::Tanh { sigma } => (tau / sigma).tanh(),
            NormalizationMap::OpenAbove { a, sigma } => 2.0 * ((tau - a) / sigma).tanh() - 1.0,
            NormalizationMap::OpenBelow { b, sigma } => 1.0 - 2.0 * ((b - tau) / sigma).tanh(),
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match *self {
            NormalizationMap::Affine { a, b } => {
                if x <= -1.0 {
                    a
                } else if x >= 1.0 {
                    b
                } else {
                    0.5 * (a + b) + 0.5 * x * (b - a)
                }
            }
            NormalizationMap::Tanh { sigma } => sigma * x.atanh(),
            NormalizationMap::OpenAbove { a, sigma } => a + sigma * (0.5 * (x + 1.0)).atanh(),
            NormalizationMap::OpenBelow { b, sigma } => b - sigma * (0.5 * (1.0 - x)).atanh(),
        }
    }

    /// dφ/dτ.
    pub fn derivative(&self, tau: f64) -> f64 {
        let sech2 = |u: f64| {
            let c = u.cosh();
            1.0 / (c * c)
        };
        match *self {
            NormalizationMap::Affine { a, b } => 2.0 / (b - a),
            NormalizationMap::Tanh { sigma } => sech2(tau / sigma) / sigma,
            NormalizationMap::OpenAbove { a, sigma } => 2.0 * sech2((tau - a) / sigma) / sigma,
            NormalizationMap::OpenBelow { b, sigma } => 2.0 * sech2((b - tau) / sigma) / sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoteKind {
    FinitePower,
    InfinitePower,
    InfiniteExponential,
}

/// Leading behavior of a warp toward one endpoint: `C·σ^p` at a finite end
/// (σ the distance to it), `C·|τ|^p` or `C·e^{p·τ}` toward an infinite end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointAsymptote {
    pub kind: AsymptoteKind,
    pub exponent: f64,
    pub coefficient: f64,
}

impl EndpointAsymptote {
    pub fn finite_power(exponent: f64, coefficient: f64) -> Self {
        EndpointAsymptote {
            kind: AsymptoteKind::FinitePower,
            exponent,
            coefficient,
        }
    }

    pub fn infinite_power(exponent: f64, coefficient: f64) -> Self {
        EndpointAsymptote {
            kind: AsymptoteKind::InfinitePower,
            exponent,
            coefficient,
        }
    }

    pub fn exponential(exponent: f64, coefficient: f64) -> Self {
        EndpointAsymptote {
            kind: AsymptoteKind::InfiniteExponential,
            exponent,
            coefficient,
        }
    }

    pub fn validate(&self, endpoint: f64) -> Result<(), ModelError> {
        let finite_kind = self.kind == AsymptoteKind::FinitePower;
        if finite_kind != endpoint.is_finite() {
            return Err(ModelError::Config(format!(
                "asymptote kind {:?} does not fit endpoint {endpoint}",
                self.kind
            )));
        }
        if !(self.coefficient > 0.0 && self.coefficient.is_finite() && self.exponent.is_finite()) {
            return Err(ModelError::Config("asymptote needs a positive coefficient and finite exponent".into()));
        }
        Ok(())
    }

    /// The asymptotic value at τ.
    pub fn leading_value(&self, interval: &Interval, end: End, tau: f64) -> f64 {
        match self.kind {
            AsymptoteKind::FinitePower => {
                let sigma = (tau - interval.endpoint(end)).abs();
                self.coefficient * sigma.powf(self.exponent)
            }
            AsymptoteKind::InfinitePower => self.coefficient * tau.abs().powf(self.exponent),
            AsymptoteKind::InfiniteExponential => self.coefficient * (self.exponent * tau).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FiberKind {
    Line,
    Circle { radius: f64 },
    Sphere { radius: f64 },
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberSpec {
    #[serde(flatten)]
    pub kind: FiberKind,
    pub strongly_convex: bool,
}

impl FiberSpec {
    pub fn line() -> Self {
        FiberSpec {
            kind: FiberKind::Line,
            strongly_convex: true,
        }
    }

    pub fn sphere(radius: f64) -> Self {
        FiberSpec {
            kind: FiberKind::Sphere { radius },
            strongly_convex: false,
        }
    }

    pub fn circle(radius: f64) -> Self {
        FiberSpec {
            kind: FiberKind::Circle { radius },
            strongly_convex: false,
        }
    }

    pub fn has_winding_menu(&self) -> bool {
        matches!(self.kind, FiberKind::Circle { .. } | FiberKind::Sphere { .. })
    }
}

/// Length of the `m`-th shortest fiber geodesic joining two points at distance
/// `l` (index 0 is `l` itself). `None` when the fiber has no such geodesic.
pub fn fiber_length_menu(fiber: &FiberSpec, l: f64, m: usize) -> Option<f64> {
    match fiber.kind {
        FiberKind::Circle { radius } | FiberKind::Sphere { radius } => {
            let turn = 2.0 * PI * radius;
            let k = (m / 2) as f64;
            Some(if m.is_multiple_of(2) { l + turn * k } else { turn - l + turn * k })
        }
        FiberKind::Line | FiberKind::Abstract => (m == 0).then_some(l),
    }
}

/// Joint evaluation of all warps and their derivatives at one τ.
pub trait WarpProfile: Send + Sync + fmt::Debug {
    fn eval(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError>;
}

#[derive(Debug, Clone)]
pub struct Factor {
    pub fiber: FiberSpec,
    pub asym_a: Option<EndpointAsymptote>,
    pub asym_b: Option<EndpointAsymptote>,
    /// Expression text for user-declared warps.
    pub warp_text: Option<String>,
    pub deriv_text: Option<String>,
}

impl Factor {
    pub fn asymptote(&self, end: End) -> Option<&EndpointAsymptote> {
        match end {
            End::A => self.asym_a.as_ref(),
            End::B => self.asym_b.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpacetimeModel {
    pub name: String,
    pub interval: Interval,
    pub factors: Vec<Factor>,
    profile: Arc<dyn WarpProfile>,
    source: serde_json::Value,
}

impl SpacetimeModel {
    pub fn new(
        name: impl Into<String>,
        interval: Interval,
        factors: Vec<Factor>,
        profile: Arc<dyn WarpProfile>,
        source: serde_json::Value,
    ) -> Result<SpacetimeModel, ModelError> {
        if factors.is_empty() || factors.len() > MAX_FACTORS {
            return Err(ModelError::Config(format!(
                "a model needs between 1 and {MAX_FACTORS} factors"
            )));
        }
        for f in &factors {
            if let Some(a) = &f.asym_a {
                a.validate(interval.a)?;
            }
            if let Some(b) = &f.asym_b {
                b.validate(interval.b)?;
            }
            match f.fiber.kind {
                FiberKind::Circle { radius } | FiberKind::Sphere { radius } if !(radius > 0.0) => {
                    return Err(ModelError::Config("fiber radius must be positive".into()));
                }
                _ => {}
            }
        }
        Ok(SpacetimeModel {
            name: name.into(),
            interval,
            factors,
            profile,
            source,
        })
    }

    /// Builds a model from expression warps. Derivatives are taken
    /// symbolically unless supplied.
    pub fn from_expressions(
        name: impl Into<String>,
        interval: Interval,
        warps: Vec<(Expr, Option<Expr>, Factor)>,
    ) -> Result<SpacetimeModel, ModelError> {
        let mut exprs = Vec::new();
        let mut derivs = Vec::new();
        let mut factors = Vec::new();
        for (e, d, mut factor) in warps {
            let d = d.unwrap_or_else(|| differentiate(&e));
            factor.warp_text = Some(e.to_string());
            factor.deriv_text = Some(d.to_string());
            exprs.push(e);
            derivs.push(d);
            factors.push(factor);
        }
        let name = name.into();
        let profile = Arc::new(ExprProfile { exprs, derivs });
        let mut model = SpacetimeModel::new(name, interval, factors, profile, serde_json::Value::Null)?;
        model.source = io::explicit_json(&model);
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }

    /// JSON description this model was built from (re-loadable).
    pub fn source(&self) -> &serde_json::Value {
        &self.source
    }

    /// Values and derivatives of all warps at τ, into the leading `n` slots.
    pub fn eval_into(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        if !self.interval.contains(tau) {
            return Err(ModelError::Domain {
                tau,
                a: self.interval.a,
                b: self.interval.b,
            });
        }
        let n = self.n();
        self.profile.eval(tau, &mut vals[..n], &mut ders[..n])?;
        for (i, v) in vals[..n].iter().enumerate() {
            if !(*v > 0.0) {
                return Err(ModelError::NonPositive { factor: i, tau });
            }
        }
        Ok(())
    }

    pub fn warp(&self, i: usize, tau: f64) -> Result<f64, ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut d = [0.0; MAX_FACTORS];
        self.eval_into(tau, &mut v, &mut d)?;
        Ok(v[i])
    }

    pub fn warp_deriv(&self, i: usize, tau: f64) -> Result<f64, ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut d = [0.0; MAX_FACTORS];
        self.eval_into(tau, &mut v, &mut d)?;
        Ok(d[i])
    }

    /// Model keeping only the listed factors, in the listed order.
    pub fn restrict(&self, keep: &[usize]) -> Result<SpacetimeModel, ModelError> {
        if keep.is_empty() || keep.iter().any(|&i| i >= self.n()) {
            return Err(ModelError::Config("invalid factor selection".into()));
        }
        let factors = keep.iter().map(|&i| self.factors[i].clone()).collect();
        let profile = Arc::new(SubsetProfile {
            inner: self.profile.clone(),
            inner_n: self.n(),
            keep: keep.to_vec(),
        });
        let mut source = self.source.clone();
        if let serde_json::Value::Object(map) = &mut source {
            let existing: Option<Vec<usize>> = map
                .get("keep")
                .and_then(|v| serde_json::from_value(v.clone()).ok());
            let composed: Vec<usize> = match existing {
                Some(prev) => keep.iter().map(|&i| prev[i]).collect(),
                None => keep.to_vec(),
            };
            map.insert("keep".into(), serde_json::json!(composed));
        }
        SpacetimeModel::new(self.name.clone(), self.interval, factors, profile, source)
    }
}

/// Evaluates user-declared `exprs` and their derivatives.
#[derive(Debug)]
struct ExprProfile {
    exprs: Vec<Expr>,
    derivs: Vec<Expr>,
}

impl WarpProfile for ExprProfile {
    fn eval(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        for (i, (e, d)) in self.exprs.iter().zip(&self.derivs).enumerate() {
            vals[i] = e.eval(tau).map_err(|source| ModelError::Eval { factor: i, source })?;
            ders[i] = d.eval(tau).map_err(|source| ModelError::Eval { factor: i, source })?;
        }
        Ok(())
    }
}

#[derive(Debug)]
struct SubsetProfile {
    inner: Arc<dyn WarpProfile>,
    inner_n: usize,
    keep: Vec<usize>,
}

impl WarpProfile for SubsetProfile {
    fn eval(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut d = [0.0; MAX_FACTORS];
        self.inner.eval(tau, &mut v[..self.inner_n], &mut d[..self.inner_n])?;
        for (slot, &i) in self.keep.iter().enumerate() {
            vals[slot] = v[i];
            ders[slot] = d[i];
        }
        Ok(())
    }
}
