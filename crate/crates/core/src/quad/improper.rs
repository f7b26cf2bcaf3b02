//! Convergence of `∫ fᵢ⁻² (f^ĉ − m)^{-1/2}` up to an interval end.
//!
//! Every quantity near the end is classified as `e^{rate·X} X^{power}` with
//! `X → ∞` the reach toward the end: `X = 1/σ` at a finite end (σ the distance)
//! and `X = |τ|` at an infinite one. Products add classes, so the verdict
//! follows from the declared asymptotes alone unless the leading part of
//! `f^ĉ` cancels `m` exactly.

use std::cmp::Ordering;

use serde::Serialize;

use super::{Potential, QuadError};
use crate::model::{AsymptoteKind, End, EndpointAsymptote, SpacetimeModel, MAX_FACTORS};
use crate::numeric::{integrate, QuadTol};

const CLASS_TOL: f64 = 1e-12;
const PIECE_TOL: QuadTol = QuadTol {
    abs: 1e-14,
    rel: 1e-10,
    max_segments: 400,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Divergence {
    Diverges,
    /// `value` is the integral from `from` to the end.
    Converges { from: f64, value: f64 },
}

impl Divergence {
    pub fn diverges(&self) -> bool {
        matches!(self, Divergence::Diverges)
    }
}

type Class = (f64, f64);

fn class_cmp(x: Class, y: Class) -> Ordering {
    let close = |a: f64, b: f64| (a - b).abs() <= CLASS_TOL * (1.0 + a.abs().max(b.abs()));
    if !close(x.0, y.0) {
        x.0.total_cmp(&y.0)
    } else if !close(x.1, y.1) {
        x.1.total_cmp(&y.1)
    } else {
        Ordering::Equal
    }
}

fn warp_class(a: &EndpointAsymptote, end: End) -> Class {
    match a.kind {
        AsymptoteKind::FinitePower => (0.0, -a.exponent),
        AsymptoteKind::InfinitePower => (0.0, a.exponent),
        AsymptoteKind::InfiniteExponential => match end {
            End::B => (a.exponent, 0.0),
            End::A => (-a.exponent, 0.0),
        },
    }
}

/// Leading class and coefficient of `f^ĉ = Σ cⱼ fⱼ⁻²` toward `end`.
fn leading_class(model: &SpacetimeModel, c: &[f64], end: End) -> Result<(Class, f64), QuadError> {
    let mut dom: Option<Class> = None;
    let mut lead = 0.0;
    for (j, &cj) in c.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        let a = model.factors[j]
            .asymptote(end)
            .ok_or(QuadError::MissingAsymptote { factor: j, end })?;
        let wc = warp_class(a, end);
        let cls = (-2.0 * wc.0, -2.0 * wc.1);
        let coef = cj / (a.coefficient * a.coefficient);
        match dom.map(|d| class_cmp(cls, d)) {
            None | Some(Ordering::Greater) => {
                dom = Some(cls);
                lead = coef;
            }
            Some(Ordering::Equal) => lead += coef,
            Some(Ordering::Less) => {}
        }
    }
    let dom = dom.ok_or_else(|| QuadError::Precondition("coefficients are all zero".into()))?;
    Ok((dom, lead))
}

/// Limit of `f^ĉ` at an interval end, read off the declared asymptotes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PotentialLimit {
    Infinite,
    Zero,
    Finite(f64),
}

pub(crate) fn potential_limit(model: &SpacetimeModel, c: &[f64], end: End) -> Result<PotentialLimit, QuadError> {
    let (dom, lead) = leading_class(model, c, end)?;
    Ok(match class_cmp(dom, (0.0, 0.0)) {
        Ordering::Greater => PotentialLimit::Infinite,
        Ordering::Less => PotentialLimit::Zero,
        Ordering::Equal => PotentialLimit::Finite(lead),
    })
}

/// Decides divergence of `∫ fᵢ⁻² (f^ĉ − m)^{-1/2}` at `end` from the declared
/// asymptotes, falling back to [`numeric_divergence`] on exact cancellation.
pub fn improper_diverges(
    model: &SpacetimeModel,
    c: &[f64],
    m: f64,
    i: usize,
    end: End,
) -> Result<Divergence, QuadError> {
    let pot = Potential::new(model, c)?;
    if i >= pot.n {
        return Err(QuadError::Precondition(format!("factor index {i} out of range")));
    }
    let asym = |j: usize| {
        model.factors[j]
            .asymptote(end)
            .ok_or(QuadError::MissingAsymptote { factor: j, end })
    };
    let (dom, lead) = leading_class(model, c, end)?;
    let violation = || {
        QuadError::Precondition(format!(
            "m = {m} exceeds the limit of f^ĉ at the {end} end"
        ))
    };
    let root_class: Class = match class_cmp(dom, (0.0, 0.0)) {
        Ordering::Greater => (-0.5 * dom.0, -0.5 * dom.1),
        Ordering::Less => {
            if m < 0.0 {
                (0.0, 0.0)
            } else if m == 0.0 {
                (-0.5 * dom.0, -0.5 * dom.1)
            } else {
                return Err(violation());
            }
        }
        Ordering::Equal => {
            let gap = lead - m;
            if gap.abs() <= CLASS_TOL * lead.abs().max(m.abs()).max(1.0) {
                return numeric_divergence(model, c, m, i, end);
            } else if gap > 0.0 {
                (0.0, 0.0)
            } else {
                return Err(violation());
            }
        }
    };
    let fi = warp_class(asym(i)?, end);
    let endpoint = model.interval.endpoint(end);
    let measure = if endpoint.is_finite() { -2.0 } else { 0.0 };
    let rate = -2.0 * fi.0 + root_class.0;
    let power = -2.0 * fi.1 + root_class.1 + measure;
    let converges = match class_cmp((rate, 0.0), (0.0, 0.0)) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => power < -1.0 - CLASS_TOL,
    };
    if !converges {
        return Ok(Divergence::Diverges);
    }
    let run = dyadic(&pot, m, i, end, 0, 2000, contracted)?;
    Ok(Divergence::Converges {
        from: run.from,
        value: run.value(),
    })
}

/// Cutoff doubling: integrates over reach windows `2^k … 2^{k+1}` for
/// `k = 4…40` and calls the integral divergent when five consecutive windows
/// fail to shrink by a factor 0.9.
pub fn numeric_divergence(
    model: &SpacetimeModel,
    c: &[f64],
    m: f64,
    i: usize,
    end: End,
) -> Result<Divergence, QuadError> {
    let pot = Potential::new(model, c)?;
    if i >= pot.n {
        return Err(QuadError::Precondition(format!("factor index {i} out of range")));
    }
    let run = dyadic(&pot, m, i, end, 4, 40, |_| false)?;
    let mut streak = 0;
    for w in run.increments.windows(2) {
        if w[1] > 0.9 * w[0] {
            streak += 1;
            if streak >= 5 {
                return Ok(Divergence::Diverges);
            }
        } else {
            streak = 0;
        }
    }
    Ok(Divergence::Converges {
        from: run.from,
        value: run.value(),
    })
}

struct Dyadic {
    from: f64,
    increments: Vec<f64>,
}

impl Dyadic {
    fn value(&self) -> f64 {
        let sum: f64 = self.increments.iter().sum();
        match self.increments.as_slice() {
            [.., p, q] if *p > 0.0 && q < p => sum + q * (q / p) / (1.0 - q / p),
            _ => sum,
        }
    }
}

fn contracted(inc: &[f64]) -> bool {
    match inc {
        [.., p, q] => {
            let total: f64 = inc.iter().sum();
            *q == 0.0 || (q < &(0.95 * p) && q * (q / p) / (1.0 - q / p) <= 1e-12 * total)
        }
        _ => false,
    }
}

/// Window integrals toward `end`, starting at reach level `k0`, for at most
/// `k_max − k0` windows or until `stop` holds. Stops early once `f^ĉ − m`
/// can no longer be resolved in floating point.
fn dyadic(
    pot: &Potential<'_>,
    m: f64,
    i: usize,
    end: End,
    k0: u32,
    k_max: u32,
    mut stop: impl FnMut(&[f64]) -> bool,
) -> Result<Dyadic, QuadError> {
    let iv = pot.model.interval;
    let e = iv.endpoint(end);
    let inward = match end {
        End::A => 1.0,
        End::B => -1.0,
    };
    let gap = |t: f64| -> Option<f64> { pot.value(t).ok().map(|f| f - m) };
    // Below this f^ĉ − m is lost to cancellation against m.
    let floor = 1e-12 * m.abs();
    // Cutoff at reach level k.
    let cut: Box<dyn Fn(i32) -> f64> = if e.is_finite() {
        let w = iv.width().min(1.0);
        // Move the base inward until f^ĉ − m is positive near the end.
        let mut base = w;
        for _ in 0..40 {
            let ok = (1..=64).all(|s| {
                let t = e + inward * base * 0.5f64.powi(k0 as i32) * s as f64 / 64.0;
                gap(t).is_some_and(|g| g > 0.0)
            });
            if ok {
                break;
            }
            base *= 0.5;
        }
        Box::new(move |k| e + inward * base * 0.5f64.powi(k))
    } else {
        let other = iv.endpoint(end.other());
        let anchor = if other.is_finite() { other } else { 0.0 };
        let base = anchor.abs().max(1.0);
        Box::new(move |k| anchor - inward * base * 2f64.powi(k))
    };
    let from = cut(k0 as i32);
    let mut increments = Vec::new();
    let integrand = |t: f64, out: &mut [f64; MAX_FACTORS]| -> Result<(), QuadError> {
        let p = pot.point(t)?;
        let g = p.f - m;
        if !(g > 0.0) {
            return Err(QuadError::Bracketing(format!("f^ĉ − m = {g} at τ = {t}")));
        }
        out[0] = p.inv_f2[i] / g.sqrt();
        Ok(())
    };
    for k in k0 as i32..k_max as i32 {
        let (lo, hi) = (cut(k), cut(k + 1));
        if lo == hi || !iv.contains(hi) || !hi.is_finite() {
            break;
        }
        match gap(hi) {
            Some(g) if g.abs() > floor && g > 0.0 => {}
            _ => break,
        }
        let q = match integrate(integrand, 1, lo, hi, PIECE_TOL) {
            Ok(q) => q.value[0].abs(),
            Err(QuadError::Bracketing(_)) | Err(QuadError::Model(_)) => break,
            Err(e) => return Err(e),
        };
        increments.push(q);
        if stop(&increments) {
            break;
        }
    }
    Ok(Dyadic { from, increments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{de_sitter_grw, minkowski_strip, schwarzschild_interior};

    #[test]
    fn examples() {
        let mk = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        assert!(improper_diverges(&mk, &[0.3, 0.7], 0.0, 0, End::B).unwrap().diverges());
        let ds = de_sitter_grw().unwrap();
        for end in [End::A, End::B] {
            match improper_diverges(&ds, &[1.0], 0.0, 0, end).unwrap() {
                Divergence::Converges { from, value } => {
                    // ∫_x^∞ sech = π/2 − gd(x) = 2·atan(e^{-x}).
                    let want = 2.0 * (-from.abs()).exp().atan();
                    assert!((value - want).abs() < 1e-8 * want, "{value} vs {want}");
                }
                Divergence::Diverges => panic!("de Sitter tail must converge"),
            }
        }
        let s = schwarzschild_interior(1.0).unwrap();
        assert!(!improper_diverges(&s, &[1.0, 0.0], 0.0, 0, End::A).unwrap().diverges());
    }

    #[test]
    fn m_above_limit_is_rejected() {
        let ds = de_sitter_grw().unwrap();
        assert!(matches!(
            improper_diverges(&ds, &[1.0], 0.1, 0, End::B),
            Err(QuadError::Precondition(_))
        ));
        let strip = minkowski_strip(0.0, 1.0, 1).unwrap();
        assert!(improper_diverges(&strip, &[1.0], 2.0, 0, End::A).is_err());
    }

    #[test]
    fn bounded_strip_value_is_exact() {
        let strip = minkowski_strip(0.0, 1.0, 2).unwrap();
        let r = improper_diverges(&strip, &[0.5, 0.5], 0.25, 0, End::B).unwrap();
        assert!(!r.diverges());
        match r {
            Divergence::Converges { from, value } => {
                let want = (1.0 - from) / (0.75f64).sqrt();
                assert!((value - want).abs() < 1e-10);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn arithmetic_agrees_with_cutoff_doubling() {
        let s = schwarzschild_interior(1.0).unwrap();
        let ds = de_sitter_grw().unwrap();
        let mk = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 1).unwrap();
        let cases: Vec<(&SpacetimeModel, Vec<f64>, f64, usize, End)> = vec![
            (&s, vec![1.0, 0.0], 0.0, 0, End::A),
            (&s, vec![1.0, 0.0], 0.0, 1, End::A),
            (&s, vec![0.5, 0.5], -1.0, 0, End::A),
            (&s, vec![0.5, 0.5], -1.0, 1, End::B),
            (&s, vec![0.0, 1.0], 0.0, 1, End::B),
            (&ds, vec![1.0], 0.0, 0, End::B),
            (&ds, vec![1.0], -1.0, 0, End::A),
            (&mk, vec![1.0], 0.0, 0, End::B),
        ];
        for (model, c, m, i, end) in cases {
            let a = improper_diverges(model, &c, m, i, end).unwrap();
            let b = numeric_divergence(model, &c, m, i, end).unwrap();
            assert_eq!(a.diverges(), b.diverges(), "c={c:?} m={m} i={i} end={end}");
        }
    }
}
