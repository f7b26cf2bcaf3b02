use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::{
    EndpointAsymptote, Factor, FiberSpec, Interval, ModelError, SpacetimeModel, WarpProfile,
};

#[derive(Debug)]
struct ConstantProfile;

impl WarpProfile for ConstantProfile {
    fn eval(&self, _tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        vals.fill(1.0);
        ders.fill(0.0);
        Ok(())
    }
}

#[derive(Debug)]
struct CoshProfile;

impl WarpProfile for CoshProfile {
    fn eval(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        vals.fill(tau.cosh());
        ders.fill(tau.sinh());
        Ok(())
    }
}

/// Radial profile of the region between the horizons of a charged (or
/// uncharged) black hole, in proper time τ of the comoving observers.
///
/// With `d = √(m² − e²)` the radius is parametrized as
/// `τ = mψ − d·sin ψ`, `r = m − d·cos ψ`, `ψ ∈ (0, π)`, so `dr/dτ = d·sin ψ / r`,
/// which is exactly `√(2m/r − e²/r² − 1)`. Factor 0 is that derivative
/// (the warp of the radial line) and factor 1 is `r` itself.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CycloidProfile {
    m: f64,
    d: f64,
}

/// Angle data at one τ: `sin ψ`, `cos ψ` and `r`, computed without cancellation
/// near either end.
struct CyclePoint {
    sin: f64,
    cos: f64,
    r: f64,
}

// ψ − sin ψ for small ψ.
fn psi_minus_sin(psi: f64) -> f64 {
    if psi < 0.25 {
        let p2 = psi * psi;
        psi * p2
            * (1.0 / 6.0
                - p2 * (1.0 / 120.0 - p2 * (1.0 / 5040.0 - p2 * (1.0 / 362_880.0 - p2 / 39_916_800.0))))
    } else {
        psi - psi.sin()
    }
}

impl CycloidProfile {
    pub(crate) fn new(m: f64, e: f64) -> Result<Self, ModelError> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("mass must be positive, got {m}")));
        }
        if !(e * e < m * m) {
            return Err(ModelError::InvalidParameter(format!(
                "charge {e} leaves no region between horizons for mass {m}"
            )));
        }
        Ok(CycloidProfile {
            m,
            d: (m * m - e * e).sqrt(),
        })
    }

    pub(crate) fn tau_plus(&self) -> f64 {
        PI * self.m
    }

    pub(crate) fn r_minus(&self) -> f64 {
        self.m - self.d
    }

    pub(crate) fn r_plus(&self) -> f64 {
        self.m + self.d
    }

    /// Solves `p·x + q·S(x) = target` on `[0, π]` by Newton with a bisection
    /// guard, where `S` is either `x − sin x` (with `p = m − d`, `q = d`) or
    /// `sin x` (with `p = m`, `q = d`).
    fn solve(target: f64, p: f64, q: f64, use_cycloid: bool) -> f64 {
        let g = |x: f64| {
            if use_cycloid {
                p * x + q * psi_minus_sin(x) - target
            } else {
                p * x + q * x.sin() - target
            }
        };
        let dg = |x: f64| if use_cycloid { p + q * (1.0 - x.cos()) } else { p + q * x.cos() };
        let (mut lo, mut hi) = (0.0f64, PI);
        let mut x = if use_cycloid {
            let cubic = (6.0 * target / q.max(f64::MIN_POSITIVE)).cbrt();
            let linear = if p > 0.0 { target / p } else { f64::INFINITY };
            cubic.min(linear).min(PI)
        } else {
            (target / (p + q)).min(PI)
        };
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                return x;
            }
            if gx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = dg(x);
            let mut next = x - gx / d;
            if !(next > lo && next < hi) || !d.is_finite() || d <= 0.0 {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return next;
            }
            x = next;
        }
        x
    }

    fn point(&self, tau: f64) -> CyclePoint {
        let (m, d) = (self.m, self.d);
        if tau <= 0.5 * self.tau_plus() {
            let psi = Self::solve(tau, m - d, d, true);
            let half = (0.5 * psi).sin();
            CyclePoint {
                sin: psi.sin(),
                cos: psi.cos(),
                r: (m - d) + 2.0 * d * half * half,
            }
        } else {
            // δ = π − ψ solves mδ + d sin δ = τ₊ − τ.
            let delta = Self::solve(self.tau_plus() - tau, m, d, false);
            let half = (0.5 * delta).cos();
            CyclePoint {
                sin: delta.sin(),
                cos: -delta.cos(),
                r: (m - d) + 2.0 * d * half * half,
            }
        }
    }

    #[cfg(test)]
    fn radius(&self, tau: f64) -> f64 {
        self.point(tau).r
    }
}

impl WarpProfile for CycloidProfile {
    fn eval(&self, tau: f64, vals: &mut [f64], ders: &mut [f64]) -> Result<(), ModelError> {
        let d = self.d;
        let CyclePoint { sin, cos, r } = self.point(tau);
        let rate = d * sin / r;
        vals[0] = rate;
        ders[0] = d * (r * cos - d * sin * sin) / (r * r * r);
        vals[1] = r;
        ders[1] = rate;
        Ok(())
    }
}

fn finite_or_power(end: f64) -> EndpointAsymptote {
    if end.is_finite() {
        EndpointAsymptote::finite_power(0.0, 1.0)
    } else {
        EndpointAsymptote::infinite_power(0.0, 1.0)
    }
}

fn bare_factor(fiber: FiberSpec, a: EndpointAsymptote, b: EndpointAsymptote) -> Factor {
    Factor {
        fiber,
        asym_a: Some(a),
        asym_b: Some(b),
        warp_text: None,
        deriv_text: None,
    }
}

/// Flat slab `(a, b) × ℝⁿ` with unit warps.
pub fn minkowski_strip(a: f64, b: f64, n: usize) -> Result<SpacetimeModel, ModelError> {
    let interval = Interval::new(a, b)?;
    if n == 0 || n > super::MAX_FACTORS {
        return Err(ModelError::InvalidParameter(format!("factor count {n} out of range")));
    }
    let factors = (0..n)
        .map(|_| bare_factor(FiberSpec::line(), finite_or_power(a), finite_or_power(b)))
        .collect();
    SpacetimeModel::new(
        "minkowski_strip",
        interval,
        factors,
        Arc::new(ConstantProfile),
        json!({"builtin": "minkowski_strip", "a": super::ext_real::to_value(a), "b": super::ext_real::to_value(b), "n": n}),
    )
}

/// Two-dimensional de Sitter space as a warped line with warp `cosh`.
pub fn de_sitter_grw() -> Result<SpacetimeModel, ModelError> {
    let interval = Interval::new(f64::NEG_INFINITY, f64::INFINITY)?;
    SpacetimeModel::new(
        "de_sitter_grw",
        interval,
        vec![bare_factor(
            FiberSpec::line(),
            EndpointAsymptote::exponential(-1.0, 0.5),
            EndpointAsymptote::exponential(1.0, 0.5),
        )],
        Arc::new(CoshProfile),
        json!({"builtin": "de_sitter_grw"}),
    )
}

/// Region inside the horizon of a Schwarzschild black hole of mass `m`.
pub fn schwarzschild_interior(m: f64) -> Result<SpacetimeModel, ModelError> {
    let profile = CycloidProfile::new(m, 0.0)?;
    let interval = Interval::new(0.0, profile.tau_plus())?;
    let factors = vec![
        bare_factor(
            FiberSpec::line(),
            EndpointAsymptote::finite_power(-1.0 / 3.0, 2.0 * (m / 6.0).cbrt()),
            EndpointAsymptote::finite_power(1.0, 1.0 / (4.0 * m)),
        ),
        bare_factor(
            FiberSpec::sphere(1.0),
            EndpointAsymptote::finite_power(2.0 / 3.0, 0.5 * m * (6.0 / m).powf(2.0 / 3.0)),
            EndpointAsymptote::finite_power(0.0, 2.0 * m),
        ),
    ];
    SpacetimeModel::new(
        "schwarzschild_interior",
        interval,
        factors,
        Arc::new(profile),
        json!({"builtin": "schwarzschild_interior", "m": m}),
    )
}

/// Region between the inner and outer horizons of a Reissner–Nordström
/// black hole with mass `m` and charge `e`.
pub fn reissner_nordstrom_intermediate(m: f64, e: f64) -> Result<SpacetimeModel, ModelError> {
    if e == 0.0 {
        return Err(ModelError::InvalidParameter("charge must be nonzero".into()));
    }
    let profile = CycloidProfile::new(m, e)?;
    let interval = Interval::new(0.0, profile.tau_plus())?;
    let (r_minus, r_plus, d) = (profile.r_minus(), profile.r_plus(), profile.d);
    let factors = vec![
        bare_factor(
            FiberSpec::line(),
            EndpointAsymptote::finite_power(1.0, d / (r_minus * r_minus)),
            EndpointAsymptote::finite_power(1.0, d / (r_plus * r_plus)),
        ),
        bare_factor(
            FiberSpec::sphere(1.0),
            EndpointAsymptote::finite_power(0.0, r_minus),
            EndpointAsymptote::finite_power(0.0, r_plus),
        ),
    ];
    SpacetimeModel::new(
        "reissner_nordstrom_intermediate",
        interval,
        factors,
        Arc::new(profile),
        json!({"builtin": "reissner_nordstrom_intermediate", "m": m, "e": e}),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<(&'static str, &'static str)>,
    pub description: &'static str,
    pub example: serde_json::Value,
    pub factors: Vec<CatalogFactor>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogFactor {
    pub fiber: FiberSpec,
    pub asym_a: Option<EndpointAsymptote>,
    pub asym_b: Option<EndpointAsymptote>,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    let describe = |model: SpacetimeModel| -> Vec<CatalogFactor> {
        model
            .factors
            .iter()
            .map(|f| CatalogFactor {
                fiber: f.fiber,
                asym_a: f.asym_a,
                asym_b: f.asym_b,
            })
            .collect()
    };
    let entry = |name, params, description, model: SpacetimeModel| CatalogEntry {
        name,
        params,
        description,
        example: model.source().clone(),
        factors: describe(model),
    };
    vec![
        entry(
            "minkowski_strip",
            vec![("a", "lower endpoint or \"-inf\""), ("b", "upper endpoint or \"+inf\""), ("n", "number of line fibers")],
            "Flat spacetime restricted to a time slab; all warps are 1.",
            minkowski_strip(0.0, 1.0, 2).expect("valid builtin"),
        ),
        entry(
            "de_sitter_grw",
            vec![],
            "Two-dimensional de Sitter space, warp cosh over the whole line. Not geodesically connected.",
            de_sitter_grw().expect("valid builtin"),
        ),
        entry(
            "schwarzschild_interior",
            vec![("m", "mass, > 0")],
            "Inside of a Schwarzschild black hole: radial line warped by dr/dτ and a unit sphere warped by r.",
            schwarzschild_interior(1.0).expect("valid builtin"),
        ),
        entry(
            "schwarzschild_reduced",
            vec![("m", "mass, > 0")],
            "The radial-line part of the Schwarzschild interior alone.",
            schwarzschild_interior(1.0)
                .and_then(|m| m.restrict(&[0]))
                .expect("valid builtin"),
        ),
        entry(
            "reissner_nordstrom_intermediate",
            vec![("m", "mass, > 0"), ("e", "charge, 0 < e² < m²")],
            "Zone between the two horizons of a charged black hole.",
            reissner_nordstrom_intermediate(1.0, 0.6).expect("valid builtin"),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AsymptoteKind, End};

    fn catalogue() -> Vec<SpacetimeModel> {
        vec![
            minkowski_strip(0.0, 1.0, 2).unwrap(),
            minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 1).unwrap(),
            de_sitter_grw().unwrap(),
            schwarzschild_interior(1.0).unwrap(),
            schwarzschild_interior(2.5).unwrap(),
            reissner_nordstrom_intermediate(1.0, 0.6).unwrap(),
            reissner_nordstrom_intermediate(1.0, 0.95).unwrap(),
        ]
    }

    fn interior_samples(iv: &Interval, count: usize) -> Vec<f64> {
        let (lo, hi) = if iv.is_bounded() { (iv.a, iv.b) } else { (-6.0, 6.0) };
        (1..=count)
            .map(|k| lo + (hi - lo) * k as f64 / (count + 1) as f64)
            .collect()
    }

    #[test]
    fn examples() {
        let ds = de_sitter_grw().unwrap();
        assert_eq!(ds.warp(0, 0.0).unwrap(), 1.0);
        assert_eq!(ds.warp_deriv(0, 0.0).unwrap(), 0.0);
        assert!((ds.warp(0, 1.0).unwrap() - 1.543_080_634_815_243_7).abs() < 1e-12);
        let s = schwarzschild_interior(1.0).unwrap();
        assert!((s.interval.b - PI).abs() < 1e-15);
        let tau = PI / 2.0 - 1.0;
        assert!((s.warp(1, tau).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.warp(0, tau).unwrap() - 1.0).abs() < 1e-12);
        let rn = reissner_nordstrom_intermediate(1.0, 0.6).unwrap();
        let ends = (rn.warp(1, 1e-9).unwrap(), rn.warp(1, rn.interval.b - 1e-9).unwrap());
        assert!((ends.0 - 0.2).abs() < 1e-8 && (ends.1 - 1.8).abs() < 1e-8);
        assert!(reissner_nordstrom_intermediate(1.0, 1.1).is_err());
        assert!(schwarzschild_interior(0.0).is_err());
        assert!(minkowski_strip(1.0, 0.0, 1).is_err());
        assert!(minkowski_strip(0.0, 1.0, 2).unwrap().warp(0, 1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for model in catalogue() {
            let iv = model.interval;
            for tau in interior_samples(&iv, 1000) {
                let scale = tau.abs().max(1.0);
                let h = 1e-6 * scale;
                if !iv.contains(tau - h) || !iv.contains(tau + h) {
                    continue;
                }
                for i in 0..model.n() {
                    let fd = (model.warp(i, tau + h).unwrap() - model.warp(i, tau - h).unwrap()) / (2.0 * h);
                    let d = model.warp_deriv(i, tau).unwrap();
                    assert!(
                        (fd - d).abs() <= 1e-5 * (1.0 + d.abs()),
                        "{} f{i}' at {tau}: {d} vs {fd}",
                        model.name
                    );
                }
            }
        }
    }

    #[test]
    fn declared_asymptotes_match_sampled_slopes() {
        for model in catalogue() {
            let iv = model.interval;
            for end in [End::A, End::B] {
                for i in 0..model.n() {
                    let asym = model.factors[i].asymptote(end).unwrap();
                    let endpoint = iv.endpoint(end);
                    let toward = |k: i32| -> (f64, f64) {
                        let step = 2f64.powi(-k);
                        match asym.kind {
                            AsymptoteKind::FinitePower => {
                                let tau = if end == End::A { endpoint + step } else { endpoint - step };
                                (step.ln(), tau)
                            }
                            _ => {
                                let reach = if asym.kind == AsymptoteKind::InfinitePower {
                                    2f64.powi(k) / 64.0
                                } else {
                                    2.0 * k as f64
                                };
                                let tau = if end == End::A { -reach } else { reach };
                                let x = if asym.kind == AsymptoteKind::InfinitePower { reach.ln() } else { tau };
                                (x, tau)
                            }
                        }
                    };
                    let (x1, t1) = toward(20);
                    let (x2, t2) = toward(24);
                    let slope = (model.warp(i, t2).unwrap().ln() - model.warp(i, t1).unwrap().ln()) / (x2 - x1);
                    assert!(
                        (slope - asym.exponent).abs() < 0.05,
                        "{} f{i} at {end}: slope {slope} vs {}",
                        model.name,
                        asym.exponent
                    );
                    let lead = asym.leading_value(&iv, end, t2);
                    assert!((model.warp(i, t2).unwrap() / lead - 1.0).abs() < 0.05, "{} coefficient", model.name);
                }
            }
        }
    }

    #[test]
    fn schwarzschild_radius_solves_its_ode() {
        for m in [1.0, 0.3, 4.0] {
            let p = CycloidProfile::new(m, 0.0).unwrap();
            let iv = Interval::new(0.0, p.tau_plus()).unwrap();
            for tau in interior_samples(&iv, 1000) {
                // Fourth-order stencil with a step proportional to the distance to the nearest end.
                let h = 1e-3 * tau.min(p.tau_plus() - tau).min(1.0);
                let r_at = |k: f64| p.radius(tau + k * h);
                let dr = (-r_at(2.0) + 8.0 * r_at(1.0) - 8.0 * r_at(-1.0) + r_at(-2.0)) / (12.0 * h);
                let r = p.radius(tau);
                let want = (2.0 * m / r - 1.0).sqrt();
                assert!((dr - want).abs() <= 1e-8 * (1.0 + want), "m={m} τ={tau}: {dr} vs {want}");
                let mut v = [0.0; 2];
                let mut d = [0.0; 2];
                p.eval(tau, &mut v, &mut d).unwrap();
                assert!((v[0] - want).abs() <= 1e-10 * (1.0 + want));
            }
        }
    }

    #[test]
    fn cycloid_inversion_hits_parametrization() {
        let m = 1.0;
        let p = CycloidProfile::new(m, 0.0).unwrap();
        for k in 1..200 {
            let eta = PI * k as f64 / 200.0;
            let tau = m * (eta - eta.sin());
            let r = m * (1.0 - eta.cos());
            assert!((p.radius(tau) - r).abs() < 1e-12 * (1.0 + r), "η={eta}");
        }
        let tiny = p.radius(1e-12);
        let want = 0.5 * (6e-12f64).powf(2.0 / 3.0);
        assert!((tiny / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reissner_nordstrom_radius_increases() {
        let rn = reissner_nordstrom_intermediate(1.0, 0.6).unwrap();
        let mut prev = 0.2;
        for tau in interior_samples(&rn.interval, 500) {
            let r = rn.warp(1, tau).unwrap();
            assert!(r > prev && r < 1.8);
            prev = r;
            let f1 = rn.warp(0, tau).unwrap();
            let want = (2.0 / r - 0.36 / (r * r) - 1.0).sqrt();
            assert!((f1 - want).abs() < 1e-10);
        }
    }
}
