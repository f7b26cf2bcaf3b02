//! The causal integral system: find `c′` with `Σc′ = k` and `D ≤ 0` such that
//! `√c′ᵢ ∫ wᵢ (Σ c′ⱼ wⱼ + ν − D)^{-1/2} = lᵢ` on `[τ_lo, τ_hi]`, `wᵢ = fᵢ⁻²`.
//!
//! Solved by recursion on the last coefficient: for a trial `cₘ` the first
//! `m − 1` equations form the same system with `k − cₘ` and `ν + cₘwₘ`, and
//! the residual of equation `m` is strictly increasing in `cₘ`.

use serde::{Deserialize, Serialize};

use super::CausalError;
use crate::model::{SpacetimeModel, MAX_FACTORS};
use crate::numeric::{brent, integrate, QuadTol, Vals};
use crate::quad::CoefficientVector;

const TOL: QuadTol = QuadTol {
    abs: 1e-14,
    rel: 1e-12,
    max_segments: 200,
};
/// Slack on the feasibility inequalities, absorbing quadrature rounding.
pub(crate) const FEAS_TOL: f64 = 1e-9;
const PARAM_TOL: f64 = 1e-13;
const MAX_ITER: usize = 200;
const MULTISTARTS: usize = 16;

/// The extra potential term `ν`, given τ and all weights `wⱼ(τ)`.
type Nu<'a> = dyn Fn(f64, &Vals) -> f64 + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalSystemSolution {
    pub c_prime: CoefficientVector,
    #[serde(rename = "D")]
    pub d: f64,
    pub residuals: Vec<f64>,
}

struct System<'a> {
    model: &'a SpacetimeModel,
    lo: f64,
    hi: f64,
    /// Factors with positive targets, in solving order.
    idx: Vec<usize>,
    l: Vec<f64>,
}

impl System<'_> {
    /// `∫ w_{idx[p]} (Σ_{q<m} c[q] w_{idx[q]} + ν − D)^{-1/2}` for `p < m`.
    fn integrals(&self, m: usize, c: &[f64], nu: &Nu<'_>, d: f64) -> Result<Vals, CausalError> {
        let n = self.model.n();
        let q = integrate(
            |t, out| {
                let mut v = [0.0; MAX_FACTORS];
                let mut dv = [0.0; MAX_FACTORS];
                self.model.eval_into(t, &mut v[..n], &mut dv[..n])?;
                let mut w = [0.0; MAX_FACTORS];
                for j in 0..n {
                    w[j] = 1.0 / (v[j] * v[j]);
                }
                let mut s = nu(t, &w) - d;
                for p in 0..m {
                    s += c[p] * w[self.idx[p]];
                }
                if !(s > 0.0) {
                    return Err(CausalError::Numerical(format!("potential {s} is not positive at τ = {t}")));
                }
                let r = 1.0 / s.sqrt();
                for p in 0..m {
                    out[p] = w[self.idx[p]] * r;
                }
                Ok(())
            },
            m,
            self.lo,
            self.hi,
            TOL,
        )?;
        Ok(q.value)
    }

    fn target(&self, p: usize) -> f64 {
        self.l[self.idx[p]]
    }

    /// Whether some `c` with `Σc = k` meets the first `m` inequalities at `D = 0`.
    fn feasible(&self, m: usize, k: f64, nu: &Nu<'_>) -> Result<bool, CausalError> {
        if k <= 0.0 {
            return Ok(false);
        }
        if m == 1 {
            let i = self.integrals(1, &[k], nu, 0.0)?;
            return Ok(k.sqrt() * i[0] - self.target(0) >= -FEAS_TOL);
        }
        if !self.feasible(m - 1, k, nu)? {
            return Ok(false);
        }
        let c_max = self.c_max(m, k, nu)?;
        Ok(self.excess(m, k, nu, c_max)? >= -FEAS_TOL)
    }

    /// Largest `cₘ` for which the reduced system stays feasible.
    fn c_max(&self, m: usize, k: f64, nu: &Nu<'_>) -> Result<f64, CausalError> {
        let wm = self.idx[m - 1];
        let (mut lo, mut hi) = (0.0, k);
        while hi - lo > 1e-10 * k.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            let shifted = |t: f64, w: &Vals| nu(t, w) + mid * w[wm];
            if self.feasible(m - 1, k - mid, &shifted)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// Residual of equation `m` after solving the first `m − 1` with `cₘ` fixed.
    fn excess(&self, m: usize, k: f64, nu: &Nu<'_>, cm: f64) -> Result<f64, CausalError> {
        let (c, d) = self.solve_with_last(m, k, nu, cm)?;
        let i = self.integrals(m, &c, nu, d)?;
        Ok(cm.sqrt() * i[m - 1] - self.target(m - 1))
    }

    fn solve_with_last(&self, m: usize, k: f64, nu: &Nu<'_>, cm: f64) -> Result<(Vec<f64>, f64), CausalError> {
        let wm = self.idx[m - 1];
        let shifted = |t: f64, w: &Vals| nu(t, w) + cm * w[wm];
        let (mut c, d) = self
            .solve(m - 1, k - cm, &shifted)?
            .ok_or_else(|| CausalError::Numerical(format!("reduced system infeasible at c = {cm}")))?;
        c.push(cm);
        Ok((c, d))
    }

    fn solve(&self, m: usize, k: f64, nu: &Nu<'_>) -> Result<Option<(Vec<f64>, f64)>, CausalError> {
        if k <= 0.0 {
            return Ok(None);
        }
        if m == 1 {
            let l = self.target(0);
            let f = |d: f64| -> Result<f64, CausalError> { Ok(k.sqrt() * self.integrals(1, &[k], nu, d)?[0] - l) };
            let f0 = f(0.0)?;
            if f0 < -FEAS_TOL {
                return Ok(None);
            }
            if f0 <= 0.0 {
                return Ok(Some((vec![k], 0.0)));
            }
            let mut d_lo = -1.0;
            let mut it = 0;
            while f(d_lo)? > 0.0 {
                d_lo *= 2.0;
                it += 1;
                if it > MAX_ITER {
                    return Err(CausalError::Numerical("no bracket for D".into()));
                }
            }
            let d = brent(f, d_lo, 0.0, PARAM_TOL * d_lo.abs(), MAX_ITER)?;
            return Ok(Some((vec![k], d)));
        }
        if !self.feasible(m - 1, k, nu)? {
            return Ok(None);
        }
        let c_max = self.c_max(m, k, nu)?;
        if self.excess(m, k, nu, c_max)? < -FEAS_TOL {
            return Ok(None);
        }
        let cm = brent(|c| self.excess(m, k, nu, c), 0.0, c_max, PARAM_TOL, MAX_ITER)?;
        self.solve_with_last(m, k, nu, cm).map(Some)
    }
}

fn validate(model: &SpacetimeModel, lo: f64, hi: f64, l: &[f64]) -> Result<(), CausalError> {
    if l.len() != model.n() {
        return Err(CausalError::Precondition(format!(
            "expected {} fiber lengths, got {}",
            model.n(),
            l.len()
        )));
    }
    if l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(CausalError::Precondition("fiber lengths must be finite and nonnegative".into()));
    }
    let iv = model.interval;
    if !(lo < hi && iv.contains(lo) && iv.contains(hi)) {
        return Err(CausalError::Precondition(format!(
            "need τ_lo < τ_hi inside the interval, got {lo}, {hi}"
        )));
    }
    Ok(())
}

/// Solves the causal system with extra potential `nu ≥ 0`.
pub fn solve_causal_system(
    model: &SpacetimeModel,
    lo: f64,
    hi: f64,
    k: f64,
    nu: &dyn Fn(f64) -> f64,
    l: &[f64],
) -> Result<CausalSystemSolution, CausalError> {
    validate(model, lo, hi, l)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(CausalError::Precondition(format!("coefficient sum {k} must be positive")));
    }
    let idx: Vec<usize> = (0..model.n()).filter(|&i| l[i] > 0.0).collect();
    if idx.is_empty() {
        return Err(CausalError::Precondition("all fiber lengths are zero".into()));
    }
    let sys = System {
        model,
        lo,
        hi,
        idx: idx.clone(),
        l: l.to_vec(),
    };
    let nu0 = |t: f64, _w: &Vals| nu(t);
    let (cp, d) = sys.solve(idx.len(), k, &nu0)?.ok_or(CausalError::Infeasible)?;
    let mut c = vec![0.0; model.n()];
    for (p, &i) in idx.iter().enumerate() {
        c[i] = cp[p];
    }
    let ints = sys.integrals(idx.len(), &cp, &nu0, d)?;
    let mut residuals = vec![0.0; model.n()];
    for (p, &i) in idx.iter().enumerate() {
        residuals[i] = cp[p].sqrt() * ints[p] - l[i];
        if residuals[i].abs() > 1e-6 * (1.0 + l[i]) {
            return Err(CausalError::Numerical(format!(
                "residual {} for factor {} exceeds tolerance",
                residuals[i],
                i + 1
            )));
        }
    }
    Ok(CausalSystemSolution {
        c_prime: CoefficientVector { c, k },
        d,
        residuals,
    })
}

/// `min_i (√cᵢ Iᵢ(ĉ) − lᵢ)` with `Iᵢ = ∫ wᵢ (f^ĉ)^{-1/2}` over `[lo, hi]`.
pub(crate) fn causal_margin(model: &SpacetimeModel, lo: f64, hi: f64, l: &[f64], c: &[f64]) -> Result<f64, CausalError> {
    let n = model.n();
    let sys = System {
        model,
        lo,
        hi,
        idx: (0..n).collect(),
        l: l.to_vec(),
    };
    let ints = sys.integrals(n, c, &|_, _| 0.0, 0.0)?;
    Ok((0..n).map(|i| c[i].sqrt() * ints[i] - l[i]).fold(f64::INFINITY, f64::min))
}

/// Regularly spread interior starting points on the unit simplex.
fn simplex_starts(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    let mut r = 1;
    let count = |r: usize| -> usize {
        // C(r + n − 1, n − 1)
        (1..n).fold(1usize, |acc, j| acc * (r + j) / j)
    };
    while count(r) < MULTISTARTS {
        r += 1;
    }
    let mut lattice = Vec::new();
    let mut cur = vec![0usize; n];
    fn fill(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for a in (0..=left).rev() {
            cur[pos] = a;
            fill(pos + 1, left - a, cur, out);
        }
    }
    fill(0, r, &mut cur, &mut lattice);
    let total = lattice.len();
    (0..MULTISTARTS)
        .map(|s| {
            let p = &lattice[s * total / MULTISTARTS];
            p.iter()
                .map(|&a| 0.9 * a as f64 / r as f64 + 0.1 / n as f64)
                .collect()
        })
        .collect()
}

/// Pattern search for the maximum of `margin` on the unit simplex, moving mass
/// between pairs of coordinates and between one coordinate and all others.
fn direct_search(
    mut c: Vec<f64>,
    margin: &dyn Fn(&[f64]) -> Result<f64, CausalError>,
) -> Result<(Vec<f64>, f64), CausalError> {
    let n = c.len();
    let mut best = margin(&c)?;
    let mut step: f64 = 0.25;
    let mut trial = c.clone();
    while step > 1e-12 {
        let mut improved = false;
        let mut moves: Vec<(Option<usize>, Option<usize>)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    moves.push((Some(i), Some(j)));
                }
            }
            if n > 2 {
                moves.push((Some(i), None));
                moves.push((None, Some(i)));
            }
        }
        for (to, from) in moves {
            trial.copy_from_slice(&c);
            match (to, from) {
                (Some(i), Some(j)) => {
                    let d = step.min(c[j]);
                    if d <= 0.0 {
                        continue;
                    }
                    trial[i] += d;
                    trial[j] -= d;
                }
                (Some(i), None) => {
                    let rest = 1.0 - c[i];
                    let d = step.min(rest);
                    if d <= 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        trial[j] = if j == i { c[j] + d } else { c[j] * (1.0 - d / rest) };
                    }
                }
                (None, Some(j)) => {
                    let d = step.min(c[j]);
                    if d <= 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        trial[i] = if i == j { c[i] - d } else { c[i] + d / (n - 1) as f64 };
                    }
                }
                (None, None) => unreachable!(),
            }
            let v = margin(&trial)?;
            if v > best {
                best = v;
                c.copy_from_slice(&trial);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((c, best))
}

/// A unit-sum `ĉ` meeting all causal inequalities at `D = 0`, if one exists.
/// Returns the best of 16 pattern searches when its margin is at least `−1e−9`.
pub fn feasible_causal(model: &SpacetimeModel, lo: f64, hi: f64, l: &[f64]) -> Result<Option<Vec<f64>>, CausalError> {
    Ok(best_causal_margin(model, lo, hi, l)?.and_then(|(c, v)| (v >= -FEAS_TOL).then_some(c)))
}

pub(crate) fn best_causal_margin(
    model: &SpacetimeModel,
    lo: f64,
    hi: f64,
    l: &[f64],
) -> Result<Option<(Vec<f64>, f64)>, CausalError> {
    validate(model, lo, hi, l)?;
    let margin = |c: &[f64]| causal_margin(model, lo, hi, l, c);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in simplex_starts(model.n()) {
        let (c, v) = direct_search(start, &margin)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((c, v));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{minkowski_strip, schwarzschild_interior};

    fn mk(n: usize) -> SpacetimeModel {
        minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, n).unwrap()
    }

    #[test]
    fn one_factor_closed_form() {
        // 2(1 − D)^{-1/2} = 1 gives D = −3.
        let s = solve_causal_system(&mk(1), 0.0, 2.0, 1.0, &|_| 0.0, &[1.0]).unwrap();
        assert!((s.c_prime.c[0] - 1.0).abs() < 1e-12);
        assert!((s.d + 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_factor_chord() {
        let s = solve_causal_system(&mk(2), 0.0, 2.0, 1.0, &|_| 0.0, &[1.0, 1.0]).unwrap();
        assert!((s.c_prime.c[0] - 0.5).abs() < 1e-9 && (s.c_prime.c[1] - 0.5).abs() < 1e-9);
        assert!((s.d + 1.0).abs() < 1e-8);
        // Rescaled chord (√2, 1/√2, 1/√2) has squared norm −2 + ½ + ½ = −1 = D.
        let v = [2f64.sqrt(), 0.5f64.sqrt(), 0.5f64.sqrt()];
        assert!((-v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - s.d).abs() < 1e-8);
    }

    #[test]
    fn unreachable_lengths_are_infeasible() {
        let e = solve_causal_system(&mk(2), 0.0, 2.0, 1.0, &|_| 0.0, &[10.0, 10.0]).unwrap_err();
        assert_eq!(e, CausalError::Infeasible);
    }

    #[test]
    fn zero_targets_get_zero_coefficients() {
        let s = solve_causal_system(&mk(3), 0.0, 2.0, 1.0, &|_| 0.0, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.c_prime.c[1], 0.0);
        assert!((s.d + 1.0).abs() < 1e-8);
    }

    #[test]
    fn feasibility_search_examples() {
        let m = mk(2);
        let c = feasible_causal(&m, 0.0, 2.0, &[1.0, 1.0]).unwrap().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-6);
        let c = feasible_causal(&m, 0.0, 2f64.sqrt(), &[1.0, 1.0]).unwrap().unwrap();
        assert!((c[0] - 0.5).abs() < 1e-6);
        assert!(feasible_causal(&m, 0.0, 1.0, &[1.0, 1.0]).unwrap().is_none());
    }

    #[test]
    fn curved_instance_meets_residual_tolerance() {
        let s = schwarzschild_interior(1.0).unwrap();
        let c0 = [0.3, 0.7];
        let (lo, hi) = (0.8, 2.2);
        let sys = System {
            model: &s,
            lo,
            hi,
            idx: vec![0, 1],
            l: vec![0.0; 2],
        };
        let ints = sys.integrals(2, &c0, &|_, _| 0.0, 0.0).unwrap();
        let l: Vec<f64> = (0..2).map(|i| 0.9 * c0[i].sqrt() * ints[i]).collect();
        let sol = solve_causal_system(&s, lo, hi, 1.0, &|_| 0.0, &l).unwrap();
        assert!(sol.d <= 0.0);
        assert!(sol.residuals.iter().all(|r| r.abs() <= 1e-6));
        let sw = s.restrict(&[1, 0]).unwrap();
        let swapped = solve_causal_system(&sw, lo, hi, 1.0, &|_| 0.0, &[l[1], l[0]]).unwrap();
        assert!((swapped.c_prime.c[0] - sol.c_prime.c[1]).abs() < 1e-6);
        assert!((swapped.d - sol.d).abs() < 1e-6);
    }

    #[test]
    fn simplex_starts_are_interior_and_distinct() {
        for n in 1..5 {
            let s = simplex_starts(n);
            assert_eq!(s.len(), if n == 1 { 1 } else { MULTISTARTS });
            for p in &s {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|x| *x > 0.0));
            }
        }
    }
}
