//! Normalized displacements `sᵢ`, matching defects `μᵢ = 1 − sᵢ/s₁`, and the
//! chart from the coefficient simplex to the open cube.

use serde::{Deserialize, Serialize};

use super::{ConnectError, Problem};
use crate::model::{End, SpacetimeModel, MAX_FACTORS};
use crate::quad::{BounceOutcome, BounceResult, Potential, QuadError, ScanBasis, ScanGrid};

/// Below this `|K|` a degenerate start is expected and handled in closed form.
pub const KAPPA0: f64 = 1e-8;

/// Bounds on the signed initial speed `K = sign(τ′)·τ′²` at τ₀. Beyond
/// `[K⁻, K⁺]` every geodesic with `Σcᵢ = 1` is causal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBand {
    #[serde(rename = "K_minus")]
    pub k_minus: f64,
    #[serde(rename = "K_plus")]
    pub k_plus: f64,
    #[serde(rename = "Kbar_minus")]
    pub kbar_minus: f64,
    #[serde(rename = "Kbar_plus")]
    pub kbar_plus: f64,
}

pub fn k_bounds(model: &SpacetimeModel, tau0: f64) -> Result<KBand, ConnectError> {
    let n = model.n();
    let mut v = [0.0; MAX_FACTORS];
    let mut d = [0.0; MAX_FACTORS];
    model.eval_into(tau0, &mut v, &mut d)?;
    let w = v[..n].iter().map(|f| 1.0 / (f * f));
    let (hi, lo) = w.fold((0.0f64, f64::INFINITY), |(h, l), x| (h.max(x), l.min(x)));
    Ok(KBand {
        k_minus: -hi,
        k_plus: hi,
        kbar_minus: -lo,
        kbar_plus: lo,
    })
}

/// `𝒴(ĉ)`: `yⱼ = c_{j+1} / (c₁ + … + c_{j+1})`, with the last entry `cₙ / k`.
pub fn y_chart(c: &[f64]) -> Result<Vec<f64>, ConnectError> {
    let mut partial = 0.0;
    let mut out = Vec::with_capacity(c.len().saturating_sub(1));
    for (j, x) in c.iter().enumerate() {
        partial += x;
        if j == 0 {
            continue;
        }
        if !(partial > 0.0) {
            return Err(ConnectError::Precondition(format!(
                "chart undefined: c₁ + … + c{} vanishes",
                j + 1
            )));
        }
        out.push(x / partial);
    }
    Ok(out)
}

/// Inverse chart onto the simplex `Σcᵢ = k`.
pub fn y_chart_inv(y: &[f64], k: f64) -> Vec<f64> {
    let n = y.len() + 1;
    let mut c = vec![0.0; n];
    let mut partial = k;
    for j in (1..n).rev() {
        c[j] = y[j - 1] * partial;
        partial -= c[j];
    }
    c[0] = partial;
    c
}

/// Outcome of one `(ŷ, K)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSample {
    pub y: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    /// `μ₂ … μₙ`; NaN where some component diverged.
    pub mu: Vec<f64>,
    pub s1: f64,
    pub fake: bool,
    pub escape_end: Option<End>,
    /// Common endpoint when all components stop at the same place and none is fake.
    pub reached_tau: Option<f64>,
    /// Where component 1 stops (after any reflections at interval ends).
    pub terminal: Option<f64>,
}

impl MuSample {
    pub fn is_finite(&self) -> bool {
        self.s1.is_finite() && self.mu.iter().all(|m| m.is_finite())
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.iter().fold(0.0f64, |a, m| a.max(m.abs()))
    }
}

/// `sᵢ` with its fake status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SValue {
    pub s: f64,
    pub fake: bool,
    pub escape_end: Option<End>,
}

/// Potential and scan grid for one coefficient vector, reusable across `K`.
pub(crate) struct Column<'m> {
    pub c: Vec<f64>,
    pot: Potential<'m>,
    grid: ScanGrid,
}

impl Column<'_> {
    pub fn f0(&self) -> f64 {
        self.grid.f0
    }
}

/// Evaluates `sᵢ` and `μᵢ` for a fixed problem.
pub(crate) struct MuEval<'m> {
    pub model: &'m SpacetimeModel,
    pub tau0: f64,
    pub l: Vec<f64>,
    f0: [f64; MAX_FACTORS],
    basis: ScanBasis,
}

impl<'m> MuEval<'m> {
    pub fn new(model: &'m SpacetimeModel, problem: &Problem) -> Result<Self, ConnectError> {
        let n = model.n();
        if problem.l.len() != n || problem.l.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(ConnectError::Precondition("μ needs one positive fiber length per factor".into()));
        }
        let mut f0 = [0.0; MAX_FACTORS];
        let mut d = [0.0; MAX_FACTORS];
        model.eval_into(problem.tau0, &mut f0, &mut d)?;
        Ok(MuEval {
            model,
            tau0: problem.tau0,
            l: problem.l.clone(),
            f0,
            basis: ScanBasis::new(model, problem.tau0)?,
        })
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    pub fn column(&self, c: Vec<f64>) -> Result<Column<'m>, ConnectError> {
        let pot = Potential::new(self.model, &c)?;
        let grid = ScanGrid::from_basis(&self.basis, &pot)?;
        Ok(Column { c, pot, grid })
    }

    pub fn column_at(&self, y: &[f64]) -> Result<Column<'m>, ConnectError> {
        self.column(y_chart_inv(y, 1.0))
    }

    /// Generalized integration of every factor at `(ĉ, K)`.
    fn bounce(&self, col: &Column<'_>, k: f64) -> Result<Vec<BounceResult>, QuadError> {
        let d = col.f0() - k.abs();
        let eps = if k < 0.0 { -1.0 } else { 1.0 };
        let turning = col.grid.turning(&col.pot, d)?;
        let targets: Vec<Option<f64>> = self.l.iter().map(|&l| Some(l)).collect();
        let out = crate::quad::bounce_with(&col.pot, &col.grid, &turning, d, eps, &targets, true)?;
        Ok(out.into_iter().map(|r| r.expect("every target is set")).collect())
    }

    pub fn s_values(&self, col: &Column<'_>, k: f64) -> Result<Option<Vec<SValue>>, ConnectError> {
        match self.bounce(col, k) {
            Ok(rs) => Ok(Some(
                rs.iter()
                    .map(|r| SValue {
                        s: r.s_phi,
                        fake: r.is_fake(),
                        escape_end: match r.outcome {
                            BounceOutcome::Fake { escape_end, .. } => Some(escape_end),
                            _ => None,
                        },
                    })
                    .collect(),
            )),
            Err(QuadError::DegenerateStart) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// `1 − √c₁·lᵢ·fᵢ²(τ₀) / (√cᵢ·l₁·f₁²(τ₀))`: ratio of the times a geodesic
    /// resting at τ₀ needs for each fiber.
    fn closed_form(&self, c: &[f64]) -> Vec<f64> {
        let t = |i: usize| self.l[i] * self.f0[i] * self.f0[i] / c[i].sqrt();
        (1..self.n()).map(|i| 1.0 - t(i) / t(0)).collect()
    }

    pub fn sample(&self, col: &Column<'_>, y: &[f64], k: f64) -> Result<MuSample, ConnectError> {
        let Some(rs) = (match self.bounce(col, k) {
            Ok(rs) => Some(rs),
            Err(QuadError::DegenerateStart) => None,
            Err(e) => return Err(e.into()),
        }) else {
            return Ok(MuSample {
                y: y.to_vec(),
                k,
                mu: self.closed_form(&col.c),
                s1: 0.0,
                fake: false,
                escape_end: None,
                reached_tau: Some(self.tau0),
                terminal: Some(self.tau0),
            });
        };
        let s1 = rs[0].s_phi;
        let mu = rs[1..].iter().map(|r| 1.0 - r.s_phi / s1).collect();
        let fake_at = rs.iter().find_map(|r| match r.outcome {
            BounceOutcome::Fake { escape_end, .. } => Some(escape_end),
            _ => None,
        });
        Ok(MuSample {
            y: y.to_vec(),
            k,
            mu,
            s1,
            fake: fake_at.is_some(),
            escape_end: fake_at,
            reached_tau: if fake_at.is_some() { None } else { rs[0].reached() },
            terminal: rs[0].terminal,
        })
    }

    /// Sample at a fresh coefficient point.
    pub fn sample_at(&self, y: &[f64], k: f64) -> Result<MuSample, ConnectError> {
        let col = self.column_at(y)?;
        self.sample(&col, y, k)
    }
}

/// `sᵢ(ĉ, K)` for one factor. `None` at a degenerate start.
pub fn s_value(
    model: &SpacetimeModel,
    problem: &Problem,
    c: &[f64],
    k: f64,
    i: usize,
) -> Result<Option<SValue>, ConnectError> {
    let ev = MuEval::new(model, problem)?;
    if i >= ev.n() {
        return Err(ConnectError::Precondition(format!("factor index {i} out of range")));
    }
    let col = ev.column(c.to_vec())?;
    Ok(ev.s_values(&col, k)?.map(|s| s[i]))
}

/// `μ₂ … μₙ` and `s₁` at `(ĉ, K)`, with the closed form at a degenerate start.
pub fn mu(model: &SpacetimeModel, problem: &Problem, c: &[f64], k: f64) -> Result<MuSample, ConnectError> {
    let ev = MuEval::new(model, problem)?;
    let y = if c.len() > 1 { y_chart(c)? } else { Vec::new() };
    let col = ev.column(c.to_vec())?;
    ev.sample(&col, &y, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{de_sitter_grw, minkowski_strip, schwarzschild_interior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(tau0: f64, l: &[f64]) -> Problem {
        Problem {
            tau0,
            tau1: tau0,
            l: l.to_vec(),
        }
    }

    #[test]
    fn k_bounds_examples() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let b = k_bounds(&m, 0.7).unwrap();
        assert_eq!((b.k_plus, b.kbar_plus, b.k_minus), (1.0, 1.0, -1.0));
        let ds = de_sitter_grw().unwrap();
        let s = 1.0 / 1f64.cosh();
        assert!((k_bounds(&ds, 1.0).unwrap().k_plus - s * s).abs() < 1e-15);
        // τ where the areal radius is 1 for m = 1: r = 1 − cos η = 1, η = π/2.
        let sch = schwarzschild_interior(1.0).unwrap();
        let tau = std::f64::consts::FRAC_PI_2 - 1.0;
        let b = k_bounds(&sch, tau).unwrap();
        assert!((b.k_plus - 1.0).abs() < 1e-9 && (b.kbar_plus - 1.0).abs() < 1e-9, "{b:?}");
        assert!(b.kbar_minus >= b.k_minus && b.kbar_plus <= b.k_plus);
    }

    #[test]
    fn chart_examples() {
        assert_eq!(y_chart(&[0.4, 0.6]).unwrap(), vec![0.6]);
        let y = y_chart(&[0.2, 0.3, 0.5]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
        assert!(y_chart(&[0.0, 0.0, 1.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.gen_range(2..6);
            let y: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.01..0.99)).collect();
            let back = y_chart(&y_chart_inv(&y, 1.0)).unwrap();
            for (a, b) in y.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-14, "{y:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn s_value_on_the_strip() {
        let strip = minkowski_strip(0.0, 1.0, 1).unwrap();
        let p = problem(0.2, &[0.3]);
        for k in [0.04, 0.25, 1.0] {
            let s = s_value(&strip, &p, &[1.0], k, 0).unwrap().unwrap();
            let t: f64 = 0.2 + 0.3 * k.sqrt();
            assert!((s.s - 2.0 * (t - 0.2)).abs() < 1e-9, "K={k}: {s:?}");
            assert!(!s.fake);
            let down = s_value(&strip, &p, &[1.0], -k, 0).unwrap().unwrap();
            assert!((down.s - s.s).abs() < 1e-9 || down.fake);
        }
        let far = s_value(&strip, &problem(0.2, &[3.0]), &[1.0], 1.0, 0).unwrap().unwrap();
        assert!(far.fake && far.escape_end == Some(End::B));
    }

    #[test]
    fn mu_examples() {
        let line = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let sym = problem(0.0, &[1.0, 1.0]);
        for k in [-0.9, -0.3, 0.2, 0.8] {
            assert!(mu(&line, &sym, &[0.5, 0.5], k).unwrap().mu[0].abs() < 1e-12);
        }
        // Constant warps give a degenerate start at K = 0.
        let at_rest = mu(&line, &problem(0.0, &[1.0, 2.0]), &[0.5, 0.5], 0.0).unwrap();
        assert_eq!(at_rest.s1, 0.0);
        assert!((at_rest.mu[0] + 1.0).abs() < 1e-15);
        assert_eq!(at_rest.reached_tau, Some(0.0));
    }
}
