//! Generalized integration along the τ-path of a geodesic, with reflections at
//! turning points and, for fake geodesics, at the interval ends.
//!
//! The path from τ₀ is cut into legs between consecutive reflections, and each
//! leg into two halves at its midpoint in normalized coordinates. Every half
//! has a regular inner end and an outer end whose kind picks the substitution
//! that makes the integrand tractable there.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use super::{DerivClass, Potential, QuadError, ScanGrid, TurningData, DEGENERATE_SLOPE};
use crate::model::{End, NormalizationMap, SpacetimeModel, MAX_FACTORS};
use crate::numeric::{integrate, QuadTol, Vals};

pub(crate) const PATH_TOL: QuadTol = QuadTol {
    abs: 1e-13,
    rel: 1e-11,
    max_segments: 2000,
};
const LOCATE_TOL: QuadTol = QuadTol {
    abs: 1e-15,
    rel: 1e-12,
    max_segments: 400,
};
const MAX_SWEEPS: f64 = 1e5;
const MAX_PIECES: usize = 4000;
// A piece sequence is taken as convergent once successive pieces shrink by this factor.
const CONTRACTION: f64 = 0.95;
// Consecutive non-contracting pieces after which an unbounded component is
// declared divergent instead of being followed to the floating-point limit.
const STALL_PIECES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outer {
    Regular,
    /// Simple zero of `f^ĉ − D` with `|d f^ĉ/dτ| = slope`.
    Turning { slope: f64 },
    /// An end of the interval.
    Approach { end: End },
    /// Degenerate zero of `f^ĉ − D`.
    Barrier,
}

#[derive(Debug, Clone, Copy)]
struct HalfLeg {
    inner: f64,
    outer: f64,
    kind: Outer,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Linear { lo: f64, hi: f64 },
    /// `τ = outer − (outer − inner)(1 − v)²`.
    Quadratic { inner: f64, outer: f64, linearize: Option<f64> },
    /// Quadratic in the normalized coordinate, toward an infinite end.
    XSpace { x_in: f64, x_out: f64 },
}

#[derive(Debug, Clone)]
enum Run {
    Smooth {
        map: Map,
        total: Vals,
    },
    Pieces {
        /// Piece boundaries from the inner end outward.
        bounds: Vec<f64>,
        /// Cumulative integrals at each boundary.
        cum: Vec<Vals>,
        /// `INFINITY` for components that never contracted.
        total: Vals,
    },
}

impl Run {
    fn total(&self) -> &Vals {
        match self {
            Run::Smooth { total, .. } | Run::Pieces { total, .. } => total,
        }
    }
}

struct Ctx<'a, 'm> {
    pot: &'a Potential<'m>,
    d: f64,
    phi: NormalizationMap,
}

impl Ctx<'_, '_> {
    /// Writes `jac · √cᵢ fᵢ⁻² (f^ĉ − D)^{-1/2}` for all i.
    fn integrand(&self, map: &Map, v: f64, out: &mut Vals) -> Result<(), QuadError> {
        let n = self.pot.n;
        let iv = self.pot.model.interval;
        let (tau, jac, lin) = match *map {
            Map::Linear { lo, hi } => (lo + (hi - lo) * v, (hi - lo).abs(), None),
            Map::Quadratic {
                inner,
                outer,
                linearize,
            } => {
                let w = 1.0 - v;
                let span = outer - inner;
                let tau = outer - span * w * w;
                // The distance to the turning point comes from w, since τ itself
                // rounds onto the root well before v reaches 1.
                (tau, 2.0 * span.abs() * w, linearize.map(|s| (s, span.abs() * w * w, span.abs())))
            }
            Map::XSpace { x_in, x_out } => {
                let w = 1.0 - v;
                let x = x_out - (x_out - x_in) * w * w;
                let tau = if x.abs() < 1.0 { self.phi.inverse(x) } else { f64::NAN };
                let dphi = self.phi.derivative(tau);
                if !(tau.is_finite() && dphi > 0.0) {
                    out[..n].fill(0.0);
                    return Ok(());
                }
                (tau, 2.0 * (x_out - x_in).abs() * w / dphi, None)
            }
        };
        if !iv.contains(tau) {
            // Rounded onto an interval end: the substitution makes this a null contribution.
            out[..n].fill(0.0);
            return Ok(());
        }
        let p = self.pot.point(tau)?;
        let mut g = p.f - self.d;
        if let Some((slope, dist, span)) = lin {
            if g <= 0.0 || dist < 1e-6 * span {
                g = slope * dist;
            }
        }
        if !(g > 0.0) {
            if jac == 0.0 {
                out[..n].fill(0.0);
                return Ok(());
            }
            return Err(QuadError::Bracketing(format!(
                "f^ĉ − D = {g} at τ = {tau}"
            )));
        }
        let r = jac / g.sqrt();
        for i in 0..n {
            out[i] = self.pot.sqrt_c[i] * p.inv_f2[i] * r;
        }
        Ok(())
    }

    fn map_tau(&self, map: &Map, v: f64) -> f64 {
        match *map {
            Map::Linear { lo, hi } => lo + (hi - lo) * v,
            Map::Quadratic { inner, outer, .. } => {
                let w = 1.0 - v;
                outer - (outer - inner) * w * w
            }
            Map::XSpace { x_in, x_out } => {
                let w = 1.0 - v;
                self.phi.inverse(x_out - (x_out - x_in) * w * w)
            }
        }
    }

    fn quad(&self, map: &Map, lo: f64, hi: f64, tol: QuadTol) -> Result<Vals, QuadError> {
        let q = integrate(|v, out| self.integrand(map, v, out), self.pot.n, lo, hi, tol)?;
        Ok(q.value)
    }

    fn direct_map(&self, leg: &HalfLeg) -> Map {
        if leg.outer.is_finite() {
            Map::Quadratic {
                inner: leg.inner,
                outer: leg.outer,
                linearize: None,
            }
        } else {
            Map::XSpace {
                x_in: self.phi.forward(leg.inner),
                x_out: if leg.outer > 0.0 { 1.0 } else { -1.0 },
            }
        }
    }

    /// Whether the integrand stays tame enough near an interval end for a
    /// single substituted quadrature.
    fn direct_ok(&self, map: &Map) -> bool {
        let mut q1 = [0.0; MAX_FACTORS];
        let mut q2 = [0.0; MAX_FACTORS];
        let p1 = self.integrand(map, 1.0 - 2f64.powi(-10), &mut q1);
        let p2 = self.integrand(map, 1.0 - 2f64.powi(-20), &mut q2);
        if p1.is_err() || p2.is_err() {
            return false;
        }
        (0..self.pot.n).all(|i| {
            self.pot.c[i] == 0.0 || (q1[i].is_finite() && q2[i].is_finite() && q2[i] <= 2.0 * q1[i] + 1e-300)
        })
    }

    /// Integrates one half-leg outward from its inner end. `need[i]` is the
    /// cumulative value at which component i may stop; pieces stop once every
    /// component has contracted or met its need.
    fn run(&self, leg: &HalfLeg, need: &Vals) -> Result<Run, QuadError> {
        let n = self.pot.n;
        if leg.inner == leg.outer {
            return Ok(Run::Smooth {
                map: Map::Linear {
                    lo: leg.inner,
                    hi: leg.outer,
                },
                total: [0.0; MAX_FACTORS],
            });
        }
        let smooth = |map: Map| -> Result<Run, QuadError> {
            let total = self.quad(&map, 0.0, 1.0, PATH_TOL)?;
            Ok(Run::Smooth { map, total })
        };
        match leg.kind {
            Outer::Regular => smooth(Map::Linear {
                lo: leg.inner,
                hi: leg.outer,
            }),
            Outer::Turning { slope } => smooth(Map::Quadratic {
                inner: leg.inner,
                outer: leg.outer,
                linearize: Some(slope),
            }),
            Outer::Approach { .. } => {
                let map = self.direct_map(leg);
                if self.direct_ok(&map) {
                    smooth(map)
                } else {
                    self.pieces(leg, need)
                }
            }
            Outer::Barrier => self.pieces(leg, need),
        }
        .inspect(|r| debug_assert!(r.total()[..n].iter().all(|t| *t >= 0.0)))
    }

    fn pieces(&self, leg: &HalfLeg, need: &Vals) -> Result<Run, QuadError> {
        let n = self.pot.n;
        let toward = if leg.outer > leg.inner { 1.0 } else { -1.0 };
        let dist0 = (leg.outer - leg.inner).abs();
        let mut bounds = vec![leg.inner];
        let mut cum: Vec<Vals> = vec![[0.0; MAX_FACTORS]];
        let mut prev_piece = [f64::NAN; MAX_FACTORS];
        let mut shrinking = [0usize; MAX_FACTORS];
        let mut stalled = [0usize; MAX_FACTORS];
        let mut done = [false; MAX_FACTORS];
        let mut converged = [false; MAX_FACTORS];
        let mut tail = [0.0; MAX_FACTORS];
        for i in 0..n {
            if self.pot.c[i] == 0.0 {
                done[i] = true;
                converged[i] = true;
            }
        }
        let mut k = 0;
        while k < MAX_PIECES && !done[..n].iter().all(|d| *d) {
            k += 1;
            let lo = *bounds.last().unwrap();
            let hi = if leg.outer.is_finite() {
                leg.outer - toward * dist0 * 0.5f64.powi(k as i32)
            } else {
                lo + toward * lo.abs().max(1.0)
            };
            if hi == lo || hi == leg.outer || !hi.is_finite() || hi.abs() > 1e300 {
                break;
            }
            // Near a finite end, τ itself only resolves the distance to the end
            // to about ε·|τ|, which bounds the attainable relative accuracy.
            let tol = if leg.outer.is_finite() {
                let floor = 64.0 * f64::EPSILON * lo.abs().max(hi.abs()) / (leg.outer - hi).abs();
                QuadTol {
                    rel: PATH_TOL.rel.max(floor),
                    ..PATH_TOL
                }
            } else {
                PATH_TOL
            };
            let piece = self.quad(&Map::Linear { lo, hi }, 0.0, 1.0, tol)?;
            let mut next = *cum.last().unwrap();
            for i in 0..n {
                next[i] += piece[i];
                if done[i] {
                    continue;
                }
                if next[i] >= need[i] {
                    done[i] = true;
                    continue;
                }
                let ratio = piece[i] / prev_piece[i];
                if ratio < CONTRACTION {
                    shrinking[i] += 1;
                    stalled[i] = 0;
                } else {
                    shrinking[i] = 0;
                    stalled[i] += 1;
                    if stalled[i] >= STALL_PIECES && need[i] == f64::INFINITY {
                        done[i] = true;
                    }
                }
                let t = if piece[i] == 0.0 { 0.0 } else { piece[i] * ratio / (1.0 - ratio) };
                if (piece[i] == 0.0 && k > 1) || (ratio < CONTRACTION && t <= 1e-12 * next[i]) {
                    done[i] = true;
                    converged[i] = true;
                    tail[i] = t;
                }
                prev_piece[i] = piece[i];
            }
            bounds.push(hi);
            cum.push(next);
        }
        let last = *cum.last().unwrap();
        let mut total = [0.0; MAX_FACTORS];
        for i in 0..n {
            total[i] = if converged[i] {
                last[i] + tail[i]
            } else if shrinking[i] >= 5 {
                // Ran out of floating-point room while still contracting geometrically.
                let ratio = (cum[cum.len() - 1][i] - cum[cum.len() - 2][i])
                    / (cum[cum.len() - 2][i] - cum[cum.len() - 3][i]);
                last[i] + (cum[cum.len() - 1][i] - cum[cum.len() - 2][i]) * ratio / (1.0 - ratio)
            } else {
                f64::INFINITY
            };
        }
        Ok(Run::Pieces { bounds, cum, total })
    }

    /// τ at which component `i` of `run` accumulates `target` from the inner end.
    fn locate(&self, run: &Run, i: usize, target: f64) -> Result<f64, QuadError> {
        match run {
            Run::Smooth { map, total } => {
                let v = self.locate_in(map, i, target, total[i])?;
                Ok(self.map_tau(map, v))
            }
            Run::Pieces { bounds, cum, .. } => {
                let p = cum.partition_point(|c| c[i] < target);
                if p == 0 {
                    return Ok(bounds[0]);
                }
                if p >= cum.len() {
                    // Divergent tail beyond floating-point reach: clamp to the last point.
                    return Ok(*bounds.last().unwrap());
                }
                let map = Map::Linear {
                    lo: bounds[p - 1],
                    hi: bounds[p],
                };
                let v = self.locate_in(&map, i, target - cum[p - 1][i], cum[p][i] - cum[p - 1][i])?;
                Ok(self.map_tau(&map, v))
            }
        }
    }

    /// Solves `∫₀^v q_i = target` on `[0, 1]` given the full integral.
    fn locate_in(&self, map: &Map, i: usize, target: f64, total: f64) -> Result<f64, QuadError> {
        if target <= 0.0 {
            return Ok(0.0);
        }
        if target >= total {
            return Ok(1.0);
        }
        let tol = 1e-13 * total;
        let (mut lo, mut hi, mut c_lo, mut c_hi) = (0.0f64, 1.0f64, 0.0, total);
        let r = target / total;
        let mut v = r;
        let mut buf = [0.0; MAX_FACTORS];
        if self.integrand(map, 0.0, &mut buf).is_ok() && buf[i].is_finite() && buf[i] > 0.0 {
            // Quadratic through both ends with the start slope: exact for a
            // constant integrand under the quadratic substitution.
            let b = buf[i] / total;
            let disc = b * b + 4.0 * (1.0 - b) * r;
            if disc >= 0.0 {
                let guess = 2.0 * r / (b + disc.sqrt());
                if guess > 0.0 && guess < 1.0 {
                    v = guess;
                }
            }
        }
        let mut c_v = self.quad(map, 0.0, v, LOCATE_TOL)?[i];
        for _ in 0..100 {
            let r = c_v - target;
            if r.abs() <= tol {
                return Ok(v);
            }
            if r > 0.0 {
                hi = v;
                c_hi = c_v;
            } else {
                lo = v;
                c_lo = c_v;
            }
            if hi - lo <= 4.0 * f64::EPSILON {
                return Ok(v);
            }
            self.integrand(map, v, &mut buf)?;
            let mut next = v - r / buf[i];
            if !(next > lo && next < hi) {
                // Regula falsi fallback, nudged toward the middle to avoid stalling.
                let rf = lo + (target - c_lo) / (c_hi - c_lo) * (hi - lo);
                next = if rf > lo && rf < hi { 0.5 * (rf + 0.5 * (lo + hi)) } else { 0.5 * (lo + hi) };
            }
            let step = if next > v {
                self.quad(map, v, next, LOCATE_TOL)?[i]
            } else {
                -self.quad(map, next, v, LOCATE_TOL)?[i]
            };
            c_v += step;
            v = next;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BounceOutcome {
    Reached {
        #[serde(with = "crate::model::ext_real")]
        t: f64,
    },
    Fake { escape_end: End, covered: f64 },
    Diverged,
}

/// Reflection points crossed in order: alternately `first` and `second`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Itinerary {
    pub first: f64,
    pub second: f64,
    pub count: usize,
}

impl Itinerary {
    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| if k % 2 == 0 { self.first } else { self.second })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl Serialize for Itinerary {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.count))?;
        for k in 0..self.count {
            let x = if k % 2 == 0 { self.first } else { self.second };
            seq.serialize_element(&crate::model::ext_real::to_value(x))?;
        }
        seq.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BounceResult {
    pub outcome: BounceOutcome,
    pub itinerary: Itinerary,
    /// True when the path reflected at an interval end, so only normalized
    /// displacements are meaningful.
    pub normalized: bool,
    /// Final τ of the generalized path (after any fake reflections).
    pub terminal: Option<f64>,
    /// Total variation of the normalized coordinate along the path.
    pub s_phi: f64,
}

impl BounceResult {
    pub fn reached(&self) -> Option<f64> {
        match self.outcome {
            BounceOutcome::Reached { t } => Some(t),
            _ => None,
        }
    }

    pub fn is_fake(&self) -> bool {
        matches!(self.outcome, BounceOutcome::Fake { .. })
    }
}

fn end_kind(iv_a: f64, iv_b: f64, at: f64, degenerate: bool, slope: f64) -> Outer {
    if at == iv_b {
        Outer::Approach { end: End::B }
    } else if at == iv_a {
        Outer::Approach { end: End::A }
    } else if degenerate {
        Outer::Barrier
    } else {
        Outer::Turning { slope }
    }
}

/// Where along the path a component stops.
#[derive(Debug, Clone, Copy)]
enum Stop {
    At { leg: usize, t: f64 },
    Fake { end: End, covered: f64, touch_leg: usize },
    Diverged,
}

/// Runs the generalized integration for every component with a target,
/// sharing the τ-path between them.
pub(crate) fn bounce_with(
    pot: &Potential<'_>,
    grid: &ScanGrid,
    turning: &TurningData,
    d: f64,
    eps: f64,
    targets: &[Option<f64>],
    allow_fake: bool,
) -> Result<Vec<Option<BounceResult>>, QuadError> {
    let n = pot.n;
    let iv = pot.model.interval;
    let tau0 = grid.tau0;
    if turning.class_at_tau0 == DerivClass::DerivZero && turning.a_star == tau0 && turning.b_star == tau0 {
        return Err(QuadError::DegenerateStart);
    }
    let ctx = Ctx {
        pot,
        d,
        phi: NormalizationMap::new(&iv, tau0),
    };
    let scale = 1f64.max(grid.f0.abs()).max(d.abs());
    let at_root = grid.f0 - d <= 1e-12 * scale;
    let slope_at = |t: f64| -> Result<f64, QuadError> { Ok(if iv.contains(t) { pot.point(t)?.df.abs() } else { 0.0 }) };
    let (e1, e2, deg1, deg2) = if eps > 0.0 {
        (turning.b_star, turning.a_star, turning.degenerate_b, turning.degenerate_a)
    } else {
        (turning.a_star, turning.b_star, turning.degenerate_a, turning.degenerate_b)
    };
    let kind1 = end_kind(iv.a, iv.b, e1, deg1, if e1 == tau0 { grid.df0.abs() } else { slope_at(e1)? });
    let kind2 = end_kind(iv.a, iv.b, e2, deg2, if e2 == tau0 { grid.df0.abs() } else { slope_at(e2)? });
    let start_kind = if at_root {
        if grid.df0.abs() <= DEGENERATE_SLOPE * scale {
            Outer::Barrier
        } else {
            Outer::Turning { slope: grid.df0.abs() }
        }
    } else {
        Outer::Regular
    };
    let mid = |p: f64, q: f64| ctx.phi.inverse(0.5 * (ctx.phi.forward(p) + ctx.phi.forward(q)));
    let inf = [f64::INFINITY; MAX_FACTORS];

    let mut need = [f64::INFINITY; MAX_FACTORS];
    let mut active = [false; MAX_FACTORS];
    for i in 0..n {
        if let Some(t) = targets.get(i).copied().flatten() {
            active[i] = true;
            need[i] = t.max(0.0);
        }
    }

    // Leg 0: τ₀ → E1.
    let m0 = mid(tau0, e1);
    let h00 = ctx.run(&HalfLeg { inner: m0, outer: tau0, kind: start_kind }, &inf)?;
    let mut need01 = [f64::INFINITY; MAX_FACTORS];
    for i in 0..n {
        if active[i] {
            need01[i] = need[i] - h00.total()[i];
        }
    }
    let h01 = ctx.run(&HalfLeg { inner: m0, outer: e1, kind: kind1 }, &need01)?;
    let tot0: Vals = std::array::from_fn(|i| h00.total()[i] + h01.total()[i]);

    let reflective = |kind: Outer, total: f64| -> bool {
        total.is_finite()
            && match kind {
                Outer::Approach { .. } => allow_fake,
                Outer::Turning { .. } | Outer::Barrier | Outer::Regular => true,
            }
    };

    let mut stops: Vec<Option<Stop>> = vec![None; n];
    let mut sweepers = Vec::new();
    for i in 0..n {
        if !active[i] {
            continue;
        }
        let l = need[i];
        stops[i] = Some(if l <= h00.total()[i] {
            Stop::At {
                leg: 0,
                t: ctx.locate(&h00, i, h00.total()[i] - l)?,
            }
        } else if l <= tot0[i] || (!tot0[i].is_finite() && !matches!(kind1, Outer::Barrier)) {
            Stop::At {
                leg: 0,
                t: ctx.locate(&h01, i, l - h00.total()[i])?,
            }
        } else if !tot0[i].is_finite() {
            Stop::Diverged
        } else if !reflective(kind1, tot0[i]) {
            let Outer::Approach { end } = kind1 else { unreachable!("only interval ends stop a finite path") };
            Stop::Fake {
                end,
                covered: tot0[i],
                touch_leg: 0,
            }
        } else {
            sweepers.push(i);
            continue;
        });
    }

    let mut s1_total = [0.0; MAX_FACTORS];
    let mut s2_total = [0.0; MAX_FACTORS];
    if !sweepers.is_empty() {
        let ms = mid(e1, e2);
        let s1 = ctx.run(&HalfLeg { inner: ms, outer: e1, kind: kind1 }, &inf)?;
        let mut need2 = [f64::INFINITY; MAX_FACTORS];
        for &i in &sweepers {
            need2[i] = need[i] - tot0[i] - s1.total()[i];
        }
        let s2 = ctx.run(&HalfLeg { inner: ms, outer: e2, kind: kind2 }, &need2)?;
        s1_total = *s1.total();
        s2_total = *s2.total();
        for &i in &sweepers {
            let rem = need[i] - tot0[i];
            let (a1, a2) = (s1.total()[i], s2.total()[i]);
            let w = a1 + a2;
            let stop = if !a1.is_finite() {
                // E1 was reflective, so its half has a finite total.
                Stop::Diverged
            } else if rem <= a1 {
                Stop::At { leg: 1, t: ctx.locate(&s1, i, a1 - rem)? }
            } else if rem <= w || (!w.is_finite() && !matches!(kind2, Outer::Barrier)) {
                Stop::At { leg: 1, t: ctx.locate(&s2, i, rem - a1)? }
            } else if !w.is_finite() {
                Stop::Diverged
            } else if !reflective(kind2, a2) {
                let Outer::Approach { end } = kind2 else { unreachable!("only interval ends stop a finite path") };
                Stop::Fake {
                    end,
                    covered: tot0[i] + w,
                    touch_leg: 1,
                }
            } else if !(w > 0.0) || rem / w > MAX_SWEEPS {
                Stop::Diverged
            } else {
                let sweeps = (rem / w).floor();
                let r = rem - sweeps * w;
                let leg = 1 + sweeps as usize;
                let (first, first_total, second) = if leg % 2 == 1 { (&s1, a1, &s2) } else { (&s2, a2, &s1) };
                let t = if r <= first_total {
                    ctx.locate(first, i, first_total - r)?
                } else {
                    ctx.locate(second, i, r - first_total)?
                };
                Stop::At { leg, t }
            };
            stops[i] = Some(stop);
        }
    }

    let touch_leg = match (kind1, kind2) {
        (Outer::Approach { .. }, _) => Some((0, kind1)),
        (_, Outer::Approach { .. }) => Some((1, kind2)),
        _ => None,
    };
    let x = |t: f64| ctx.phi.forward(t);
    let p_len = (x(e1) - x(tau0)).abs();
    let q_len = (x(e2) - x(e1)).abs();
    let out = stops
        .into_iter()
        .enumerate()
        .map(|(i, stop)| {
            let stop = stop?;
            let itinerary = |count| Itinerary {
                first: e1,
                second: e2,
                count,
            };
            Some(match stop {
                Stop::At { leg, t } => {
                    let start = if leg == 0 {
                        tau0
                    } else if leg % 2 == 1 {
                        e1
                    } else {
                        e2
                    };
                    let s_phi = if leg == 0 {
                        (x(t) - x(tau0)).abs()
                    } else {
                        p_len + (leg - 1) as f64 * q_len + (x(t) - x(start)).abs()
                    };
                    let fake = touch_leg.filter(|(touch, _)| leg > *touch);
                    let outcome = match fake {
                        Some((touch, Outer::Approach { end })) => BounceOutcome::Fake {
                            escape_end: end,
                            covered: if touch == 0 { tot0[i] } else { tot0[i] + s1_total[i] + s2_total[i] },
                        },
                        _ => BounceOutcome::Reached { t },
                    };
                    BounceResult {
                        outcome,
                        itinerary: itinerary(leg),
                        normalized: fake.is_some(),
                        terminal: Some(t),
                        s_phi,
                    }
                }
                Stop::Fake { end, covered, touch_leg } => BounceResult {
                    outcome: BounceOutcome::Fake { escape_end: end, covered },
                    itinerary: itinerary(touch_leg),
                    normalized: false,
                    terminal: Some(iv.endpoint(end)),
                    s_phi: p_len + touch_leg as f64 * q_len,
                },
                Stop::Diverged => BounceResult {
                    outcome: BounceOutcome::Diverged,
                    itinerary: itinerary(0),
                    normalized: false,
                    terminal: None,
                    s_phi: f64::NAN,
                },
            })
        })
        .collect();
    Ok(out)
}

/// Generalized integration for all factors at once; `targets[i] = None` skips factor i.
pub fn bounce_all(
    model: &SpacetimeModel,
    c: &[f64],
    d: f64,
    eps: f64,
    tau0: f64,
    targets: &[Option<f64>],
    allow_fake: bool,
) -> Result<Vec<Option<BounceResult>>, QuadError> {
    let pot = Potential::new(model, c)?;
    let grid = ScanGrid::new(&pot, tau0)?;
    let turning = grid.turning(&pot, d)?;
    bounce_with(&pot, &grid, &turning, d, eps, targets, allow_fake)
}

/// Accumulates `√cᵢ ∫ fᵢ⁻² (f^ĉ − D)^{-1/2}` from τ₀ in direction `eps`,
/// reversing at each turning point, until `l_target` is covered.
#[allow(clippy::too_many_arguments)]
pub fn bounce_integrate(
    model: &SpacetimeModel,
    c: &[f64],
    d: f64,
    eps: f64,
    i: usize,
    l_target: f64,
    tau0: f64,
    allow_fake: bool,
) -> Result<BounceResult, QuadError> {
    if i >= model.n() {
        return Err(QuadError::Precondition(format!("factor index {i} out of range")));
    }
    let mut targets = vec![None; model.n()];
    targets[i] = Some(l_target);
    let r = bounce_all(model, c, d, eps, tau0, &targets, allow_fake)?
        .swap_remove(i)
        .expect("target was set");
    match r.outcome {
        BounceOutcome::Fake { escape_end, covered } if !allow_fake => Err(QuadError::Fake {
            end: escape_end,
            covered,
        }),
        _ => Ok(r),
    }
}

/// `√cᵢ ∫ fᵢ⁻² (f^ĉ − D)^{-1/2}` over one monotone segment. Ends may be simple
/// zeros of `f^ĉ − D` or interval ends.
pub fn h_segment(
    model: &SpacetimeModel,
    c: &[f64],
    d: f64,
    i: usize,
    from: f64,
    to: f64,
) -> Result<f64, QuadError> {
    let pot = Potential::new(model, c)?;
    if i >= pot.n {
        return Err(QuadError::Precondition(format!("factor index {i} out of range")));
    }
    if from == to {
        return Ok(0.0);
    }
    let iv = model.interval;
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    if lo < iv.a || hi > iv.b {
        return Err(QuadError::Precondition(format!("segment ({lo}, {hi}) leaves the interval")));
    }
    let anchor = if iv.contains(lo) { lo } else if iv.contains(hi) { hi } else { iv.center() };
    let ctx = Ctx {
        pot: &pot,
        d,
        phi: NormalizationMap::new(&iv, anchor),
    };
    let f_at = |t: f64| pot.point(t);
    let kind = |t: f64| -> Result<Outer, QuadError> {
        if t == iv.a {
            return Ok(Outer::Approach { end: End::A });
        }
        if t == iv.b {
            return Ok(Outer::Approach { end: End::B });
        }
        let p = f_at(t)?;
        let scale = 1f64.max(p.f.abs()).max(d.abs());
        let g = p.f - d;
        if g.abs() <= 1e-10 * scale {
            if p.df.abs() <= DEGENERATE_SLOPE * scale {
                return Err(QuadError::Diverged(t));
            }
            Ok(Outer::Turning { slope: p.df.abs() })
        } else if g < 0.0 {
            Err(QuadError::Bracketing(format!("f^ĉ − D < 0 at τ = {t}")))
        } else {
            Ok(Outer::Regular)
        }
    };
    let m = ctx.phi.inverse(0.5 * (ctx.phi.forward(lo) + ctx.phi.forward(hi)));
    let inf = [f64::INFINITY; MAX_FACTORS];
    let mut total = 0.0;
    for end in [lo, hi] {
        let run = ctx.run(&HalfLeg { inner: m, outer: end, kind: kind(end)? }, &inf)?;
        let t = run.total()[i];
        if !t.is_finite() {
            return Err(QuadError::Diverged(end));
        }
        total += t;
    }
    Ok(total)
}
