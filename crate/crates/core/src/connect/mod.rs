//! Connecting geodesics: causal ones from the causal system, spacelike ones
//! from the zero set of the matching defects, with winding retries on fibers
//! that have closed geodesics. Every reported geodesic is re-checked by the
//! oracle.

mod mu;
mod witness;
mod zero;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causal::{
    check_conditions, classify_causal, tau_constant_geodesic, CausalError, CausalKind, ConditionReport,
    LIGHTLIKE_TOL,
};
use crate::model::{fiber_length_menu, ModelError, SpacetimeModel, MAX_FACTORS};
use crate::oracle::{verify_connection, OracleError, VerifyReport};
use crate::quad::{bounce_all, BounceResult, CoefficientVector, QuadError};

pub use mu::{k_bounds, mu, s_value, y_chart, y_chart_inv, KBand, MuSample, SValue, KAPPA0};
pub use witness::{schwarzschild_reduced_witness, ReducedWitness};
pub use zero::{
    mu_map, reached_interval, zero_component, Contact, ReachedInterval, Resolution, ZeroComponent, ZeroNode,
    ZeroSet, REACH_TOL, ROOT_TOL,
};

use mu::MuEval;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Join `(τ₀, x)` to `(τ₁, x′)` where `x, x′` are at fiber distances `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub tau0: f64,
    pub tau1: f64,
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectOptions {
    /// Highest winding index tried on fibers with closed geodesics.
    pub max_winding: usize,
    /// Overrides of the default grid sizes.
    pub k_steps: Option<usize>,
    pub c_steps: Option<usize>,
    /// Echoed in reports; every search is deterministic.
    pub seed: u64,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions {
            max_winding: 8,
            k_steps: None,
            c_steps: None,
            seed: 0,
        }
    }
}

impl ConnectOptions {
    pub fn resolution(&self, n: usize) -> Resolution {
        let base = Resolution::default_for(n);
        Resolution {
            k_steps: self.k_steps.unwrap_or(base.k_steps),
            c_steps: self.c_steps.unwrap_or(base.c_steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalCharacter {
    Timelike,
    Lightlike,
    Spacelike,
    TauConstant,
}

impl CausalCharacter {
    fn from_d(d: f64) -> CausalCharacter {
        if d < -LIGHTLIKE_TOL {
            CausalCharacter::Timelike
        } else if d <= LIGHTLIKE_TOL {
            CausalCharacter::Lightlike
        } else {
            CausalCharacter::Spacelike
        }
    }
}

/// Everything needed to rebuild and re-integrate one connecting geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicCandidate {
    pub c_hat: CoefficientVector,
    #[serde(rename = "D")]
    pub d: f64,
    pub eps: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub tau0: f64,
    pub tau1: f64,
    /// Fiber lengths to cover, after winding.
    pub targets: Vec<f64>,
    /// Per-factor generalized integration; `None` for factors held fixed.
    #[serde(skip_deserializing)]
    pub itinerary: Vec<Option<BounceResult>>,
    pub causal_character: CausalCharacter,
    pub fake: bool,
    pub reached_tau: Option<f64>,
    pub winding: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifiedCandidate {
    pub candidate: GeodesicCandidate,
    pub verification: VerifyReport,
}

/// What was tried at one winding assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingEvidence {
    pub winding: Vec<usize>,
    pub targets: Vec<f64>,
    pub causal: Option<CausalKind>,
    pub reached_interval: Option<ReachedInterval>,
    /// Whether this attempt rules the winding out.
    pub excluded: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConnectionStatus {
    Connected { candidates: Vec<VerifiedCandidate> },
    NotConnected { evidence: Vec<WindingEvidence> },
    Undecided { reason: String, evidence: Vec<WindingEvidence> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionReport {
    #[serde(flatten)]
    pub status: ConnectionStatus,
    pub problem: Problem,
    pub reached_interval: Option<ReachedInterval>,
    pub conditions: Option<ConditionReport>,
    /// Oracle residuals of the chosen candidate.
    pub verification: Option<VerifyReport>,
    pub seed: u64,
}

impl ConnectionReport {
    pub fn is_connected(&self) -> bool {
        matches!(self.status, ConnectionStatus::Connected { .. })
    }

    pub fn best(&self) -> Option<&VerifiedCandidate> {
        match &self.status {
            ConnectionStatus::Connected { candidates } => candidates.first(),
            _ => None,
        }
    }
}

/// The problem restricted to factors with `lᵢ > 0`.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub model: SpacetimeModel,
    pub problem: Problem,
    /// Indices (into the full model) of the factors kept.
    pub keep: Vec<usize>,
    /// Indices of the factors held fixed.
    pub fixed: Vec<usize>,
}

/// Drops factors with `lᵢ = 0`: their fiber component stays constant.
pub fn reduce_problem(model: &SpacetimeModel, problem: &Problem) -> Result<ReducedProblem, ConnectError> {
    let keep: Vec<usize> = (0..model.n()).filter(|&i| problem.l[i] > 0.0).collect();
    let fixed: Vec<usize> = (0..model.n()).filter(|&i| problem.l[i] == 0.0).collect();
    let reduced_model = if keep.is_empty() || fixed.is_empty() {
        model.clone()
    } else {
        model.restrict(&keep)?
    };
    Ok(ReducedProblem {
        model: reduced_model,
        problem: Problem {
            tau0: problem.tau0,
            tau1: problem.tau1,
            l: keep.iter().map(|&i| problem.l[i]).collect(),
        },
        keep,
        fixed,
    })
}

fn validate(model: &SpacetimeModel, problem: &Problem) -> Result<(), ConnectError> {
    if problem.l.len() != model.n() {
        return Err(ConnectError::Precondition(format!(
            "expected {} fiber lengths, got {}",
            model.n(),
            problem.l.len()
        )));
    }
    if problem.l.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(ConnectError::Precondition("fiber lengths must be finite and nonnegative".into()));
    }
    for tau in [problem.tau0, problem.tau1] {
        if !model.interval.contains(tau) {
            return Err(ConnectError::Precondition(format!("τ = {tau} is outside the interval")));
        }
    }
    Ok(())
}

fn potential_at(model: &SpacetimeModel, c: &[f64], tau: f64) -> Result<f64, ConnectError> {
    let mut v = [0.0; MAX_FACTORS];
    let mut d = [0.0; MAX_FACTORS];
    model.eval_into(tau, &mut v, &mut d)?;
    Ok((0..model.n()).map(|i| c[i] / (v[i] * v[i])).sum())
}

/// Lifts a reduced solution to the full model and records its itinerary.
#[allow(clippy::too_many_arguments)]
fn build_candidate(
    model: &SpacetimeModel,
    red: &ReducedProblem,
    c_red: &[f64],
    d: f64,
    eps: f64,
    targets_red: &[f64],
    winding_red: &[usize],
    character: CausalCharacter,
) -> Result<GeodesicCandidate, ConnectError> {
    let n = model.n();
    let mut c = vec![0.0; n];
    let mut targets = vec![0.0; n];
    let mut winding = vec![0; n];
    for (j, &i) in red.keep.iter().enumerate() {
        c[i] = c_red[j];
        targets[i] = targets_red[j];
        winding[i] = winding_red[j];
    }
    let tau0 = red.problem.tau0;
    let k = eps * (potential_at(model, &c, tau0)? - d);
    let active: Vec<Option<f64>> = targets.iter().map(|&t| (t > 0.0).then_some(t)).collect();
    let itinerary = if c.iter().any(|x| *x > 0.0) {
        match bounce_all(model, &c, d, eps, tau0, &active, true) {
            Ok(rs) => rs,
            Err(QuadError::DegenerateStart) => vec![None; n],
            Err(e) => return Err(e.into()),
        }
    } else {
        vec![None; n]
    };
    let fake = itinerary.iter().flatten().any(|r| r.is_fake());
    let reached_tau = if fake {
        None
    } else {
        itinerary
            .iter()
            .flatten()
            .find_map(|r| r.reached())
            .or(itinerary.iter().all(|r| r.is_none()).then_some(red.problem.tau1))
    };
    let sum: f64 = c.iter().sum();
    Ok(GeodesicCandidate {
        c_hat: CoefficientVector { c, k: sum },
        d,
        eps,
        k,
        tau0,
        tau1: red.problem.tau1,
        targets,
        itinerary,
        causal_character: character,
        fake,
        reached_tau,
        winding,
    })
}

fn verified(model: &SpacetimeModel, cand: GeodesicCandidate, notes: &mut Vec<String>) -> Option<VerifiedCandidate> {
    if cand.fake {
        notes.push("candidate is fake".into());
        return None;
    }
    match verify_connection(model, &cand) {
        Ok(v) if v.pass => Some(VerifiedCandidate {
            candidate: cand,
            verification: v,
        }),
        Ok(v) => {
            notes.push(format!(
                "candidate failed verification (max residual {:.3e}{})",
                v.max_residual(),
                v.diagnostics.as_deref().map(|d| format!(", {d}")).unwrap_or_default()
            ));
            None
        }
        Err(e) => {
            notes.push(format!("verification error: {e}"));
            None
        }
    }
}

/// Winding assignments whose largest index is exactly `m`, over the factors
/// flagged in `menus`.
fn winding_combos(menus: &[bool], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &has in menus {
        let range = if has { 0..=m } else { 0..=0 };
        out = out
            .into_iter()
            .flat_map(|p| {
                range.clone().map(move |w| {
                    let mut q = p.clone();
                    q.push(w);
                    q
                })
            })
            .collect();
    }
    out.retain(|w| w.iter().copied().max().unwrap_or(0) == m);
    out
}

struct Attempt {
    found: Vec<VerifiedCandidate>,
    evidence: WindingEvidence,
}

#[allow(clippy::too_many_arguments)]
fn attempt(
    model: &SpacetimeModel,
    red: &ReducedProblem,
    targets: Vec<f64>,
    winding: Vec<usize>,
    res: Resolution,
    extend_fake: bool,
) -> Attempt {
    let (tau0, tau1) = (red.problem.tau0, red.problem.tau1);
    let n = red.model.n();
    let mut notes = Vec::new();
    let mut found = Vec::new();
    let mut evidence = WindingEvidence {
        winding: winding.clone(),
        targets: targets.clone(),
        causal: None,
        reached_interval: None,
        excluded: false,
        notes: Vec::new(),
    };
    let finish = |found, mut evidence: WindingEvidence, notes| {
        evidence.notes = notes;
        Attempt { found, evidence }
    };

    // Causal geodesics first: they never turn, so the causal system decides them.
    let (lo, hi) = (tau0.min(tau1), tau0.max(tau1));
    match classify_causal(&red.model, lo, hi, &targets) {
        Ok(class) => {
            evidence.causal = Some(class.kind);
            if let (CausalKind::Timelike | CausalKind::Lightlike, Some(w)) = (class.kind, &class.witness) {
                let eps = if tau1 >= tau0 { 1.0 } else { -1.0 };
                let character = if class.kind == CausalKind::Timelike {
                    CausalCharacter::Timelike
                } else {
                    CausalCharacter::Lightlike
                };
                match build_candidate(model, red, &w.c_prime.c, w.d, eps, &targets, &winding, character) {
                    Ok(cand) => found.extend(verified(model, cand, &mut notes)),
                    Err(e) => notes.push(format!("causal candidate: {e}")),
                }
                if !found.is_empty() {
                    return finish(found, evidence, notes);
                }
            }
        }
        Err(e) => notes.push(format!("causal classification failed: {e}")),
    }

    if n > 3 {
        notes.push(format!("zero-set continuation handles up to 3 factors, got {n}"));
        return finish(found, evidence, notes);
    }
    if res.k_steps < 3 || (n > 1 && res.c_steps < 3) {
        notes.push(format!("resolution {}×{} is below 3×3", res.k_steps, res.c_steps));
        return finish(found, evidence, notes);
    }
    let p = Problem {
        tau0,
        tau1,
        l: targets.clone(),
    };
    let mut zs = match zero_component(&red.model, &p, res) {
        Ok(z) => z,
        Err(e) => {
            notes.push(format!("zero set: {e}"));
            return finish(found, evidence, notes);
        }
    };
    if zs.node_count() == 0 {
        notes.push("no zero-set nodes; refining the grid ×4".into());
        match zero_component(&red.model, &p, res.scaled(4)) {
            Ok(z) => zs = z,
            Err(e) => notes.push(format!("refined zero set: {e}")),
        }
    }
    if zs.node_count() == 0 {
        notes.push("no zero-set nodes found".into());
        return finish(found, evidence, notes);
    }
    if zs.failures > 0 {
        notes.push(format!("{} grid evaluations failed", zs.failures));
    }
    let j = reached_interval(&red.model, &zs, extend_fake);
    evidence.reached_interval = j.clone();
    let inside = j.as_ref().is_some_and(|j| j.contains(tau1));
    if !inside {
        evidence.excluded = zs.failures == 0 && evidence.causal == Some(CausalKind::None);
        return finish(found, evidence, notes);
    }
    let ev = match MuEval::new(&red.model, &p) {
        Ok(ev) => ev,
        Err(e) => {
            notes.push(e.to_string());
            return finish(found, evidence, notes);
        }
    };
    let hits = zero::refine_to(&ev, &zs, tau1);
    if hits.is_empty() {
        notes.push("τ₁ lies in the reached interval but no linked nodes bracket it".into());
    }
    for hit in hits {
        let s = hit.sample;
        let c = if n == 1 { vec![1.0] } else { y_chart_inv(&s.y, 1.0) };
        let f0 = match potential_at(&red.model, &c, tau0) {
            Ok(f) => f,
            Err(e) => {
                notes.push(e.to_string());
                continue;
            }
        };
        let d = f0 - s.k.abs();
        let eps = if s.k < 0.0 { -1.0 } else { 1.0 };
        let character = if s.s1 == 0.0 {
            CausalCharacter::TauConstant
        } else {
            CausalCharacter::from_d(d)
        };
        match build_candidate(model, red, &c, d, eps, &targets, &winding, character) {
            Ok(cand) => found.extend(verified(model, cand, &mut notes)),
            Err(e) => notes.push(format!("candidate: {e}")),
        }
    }
    finish(found, evidence, notes)
}

fn tie_break(a: &VerifiedCandidate, b: &VerifiedCandidate) -> std::cmp::Ordering {
    let (x, y) = (&a.candidate, &b.candidate);
    let chart = |c: &GeodesicCandidate| {
        let positive: Vec<f64> = c.c_hat.c.iter().copied().filter(|v| *v > 0.0).collect();
        y_chart(&positive).unwrap_or_default()
    };
    x.k.abs()
        .total_cmp(&y.k.abs())
        .then_with(|| x.winding.iter().sum::<usize>().cmp(&y.winding.iter().sum::<usize>()))
        .then_with(|| {
            chart(x)
                .iter()
                .zip(&chart(y))
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// Full connection pipeline for one pair of points.
pub fn connect(model: &SpacetimeModel, problem: &Problem, opts: &ConnectOptions) -> Result<ConnectionReport, ConnectError> {
    validate(model, problem)?;
    let conditions = check_conditions(model).ok();
    let red = reduce_problem(model, problem)?;
    let report = |status, reached_interval, verification| ConnectionReport {
        status,
        problem: problem.clone(),
        reached_interval,
        conditions: conditions.clone(),
        verification,
        seed: opts.seed,
    };
    let connected = |found: Vec<VerifiedCandidate>, j: Option<ReachedInterval>| {
        let verification = found.first().map(|c| c.verification.clone());
        report(ConnectionStatus::Connected { candidates: found }, j, verification)
    };
    let (tau0, tau1) = (problem.tau0, problem.tau1);
    let mut notes = Vec::new();

    if red.keep.is_empty() {
        // Same fiber point: the base segment, or the constant curve.
        let dt = tau1 - tau0;
        let (eps, character) = if dt == 0.0 {
            (1.0, CausalCharacter::TauConstant)
        } else {
            (dt.signum(), CausalCharacter::Timelike)
        };
        let cand = build_candidate(model, &red, &[], -dt * dt, eps, &[], &[], character)?;
        let found: Vec<_> = verified(model, cand, &mut notes).into_iter().collect();
        return Ok(if found.is_empty() {
            report(
                ConnectionStatus::Undecided {
                    reason: notes.join("; "),
                    evidence: Vec::new(),
                },
                None,
                None,
            )
        } else {
            connected(found, None)
        });
    }

    if tau0 == tau1 {
        match tau_constant_geodesic(&red.model, tau0, &red.problem.l) {
            Ok(Some(c)) => {
                let d = potential_at(&red.model, &c, tau0)?;
                let cand = build_candidate(
                    model,
                    &red,
                    &c,
                    d,
                    1.0,
                    &red.problem.l,
                    &vec![0; red.keep.len()],
                    CausalCharacter::TauConstant,
                )?;
                let found: Vec<_> = verified(model, cand, &mut notes).into_iter().collect();
                if !found.is_empty() {
                    return Ok(connected(found, None));
                }
            }
            Ok(None) => {}
            Err(e) => notes.push(format!("τ-constant check: {e}")),
        }
    }

    let red_conditions = if red.fixed.is_empty() {
        conditions.clone()
    } else {
        check_conditions(&red.model).ok()
    };
    let extend_fake = red_conditions.as_ref().is_some_and(|c| c.cond_28 || c.cond_star);
    let res = opts.resolution(red.model.n());
    let menus: Vec<bool> = red.keep.iter().map(|&i| model.factors[i].fiber.has_winding_menu()).collect();
    let top = if menus.iter().any(|m| *m) { opts.max_winding } else { 0 };

    let mut evidence = Vec::new();
    let mut base_interval = None;
    for m in 0..=top {
        let mut level: Vec<VerifiedCandidate> = Vec::new();
        let mut level_interval = None;
        for winding in winding_combos(&menus, m) {
            let targets: Option<Vec<f64>> = red
                .keep
                .iter()
                .zip(&winding)
                .map(|(&i, &w)| fiber_length_menu(&model.factors[i].fiber, problem.l[i], w).filter(|x| *x > 0.0))
                .collect();
            let Some(targets) = targets else { continue };
            let a = attempt(model, &red, targets, winding, res, extend_fake);
            if m == 0 {
                base_interval = a.evidence.reached_interval.clone();
            }
            if !a.found.is_empty() && level_interval.is_none() {
                level_interval = a.evidence.reached_interval.clone();
            }
            level.extend(a.found);
            evidence.push(a.evidence);
        }
        if !level.is_empty() {
            level.sort_by(tie_break);
            return Ok(connected(level, level_interval));
        }
    }

    let cond_28_fails = red_conditions.as_ref().is_some_and(|c| !c.cond_28);
    let fixed_windings = red.fixed.iter().any(|&i| model.factors[i].fiber.has_winding_menu());
    let all_excluded = !evidence.is_empty() && evidence.iter().all(|e| e.excluded);
    let status = if cond_28_fails && all_excluded && !fixed_windings {
        ConnectionStatus::NotConnected { evidence }
    } else {
        let mut reasons = notes;
        if !cond_28_fails {
            reasons.push(match red_conditions {
                Some(_) => "line reachability holds, yet no connecting geodesic was found".into(),
                None => "endpoint conditions could not be checked".into(),
            });
        }
        if !all_excluded {
            reasons.push("reach evidence does not exclude every winding tried".into());
        }
        if fixed_windings {
            reasons.push("factors held fixed have closed geodesics that were not tried".into());
        }
        ConnectionStatus::Undecided {
            reason: reasons.join("; "),
            evidence,
        }
    };
    Ok(report(status, base_interval, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{de_sitter_grw, minkowski_strip};

    fn coarse() -> ConnectOptions {
        ConnectOptions {
            k_steps: Some(17),
            c_steps: Some(33),
            ..ConnectOptions::default()
        }
    }

    #[test]
    fn reduce_examples() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let p = |l: Vec<f64>| Problem { tau0: 0.0, tau1: 1.0, l };
        let r = reduce_problem(&m, &p(vec![0.0, 1.0])).unwrap();
        assert_eq!((r.model.n(), r.keep.clone(), r.fixed.clone()), (1, vec![1], vec![0]));
        assert_eq!(reduce_problem(&m, &p(vec![1.0, 1.0])).unwrap().model.n(), 2);
        assert!(reduce_problem(&m, &p(vec![0.0, 0.0])).unwrap().keep.is_empty());
    }

    #[test]
    fn winding_combos_have_exact_maximum() {
        assert_eq!(winding_combos(&[true, false], 2), vec![vec![2, 0]]);
        let both = winding_combos(&[true, true], 1);
        assert_eq!(both, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(winding_combos(&[false], 0), vec![vec![0]]);
    }

    #[test]
    fn base_segment() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let r = connect(&m, &Problem { tau0: 0.0, tau1: 1.5, l: vec![0.0, 0.0] }, &coarse()).unwrap();
        let best = r.best().unwrap();
        assert_eq!(best.candidate.d, -2.25);
        assert_eq!(best.candidate.causal_character, CausalCharacter::Timelike);
    }

    #[test]
    fn strip_chords() {
        let strip = minkowski_strip(0.0, 1.0, 2).unwrap();
        for (tau1, l) in [(0.8, vec![0.3, 0.4]), (0.3, vec![0.6, 0.8]), (0.2, vec![0.1, 0.1])] {
            let p = Problem { tau0: 0.2, tau1, l: l.clone() };
            let r = connect(&strip, &p, &coarse()).unwrap();
            let best = r.best().unwrap_or_else(|| panic!("{p:?}: {r:?}"));
            let norm2 = l[0] * l[0] + l[1] * l[1];
            let dt: f64 = tau1 - 0.2;
            assert!((best.candidate.d - (1.0 - dt * dt / norm2)).abs() < 1e-6, "{:?}", best.candidate);
            assert!(best.verification.max_residual() <= 1e-6);
        }
    }

    #[test]
    fn de_sitter_far_pair_is_not_connected() {
        let ds = de_sitter_grw().unwrap();
        let p = Problem {
            tau0: 0.0,
            tau1: 1.0,
            l: vec![4.0 * std::f64::consts::PI],
        };
        let r = connect(&ds, &p, &coarse()).unwrap();
        assert!(matches!(r.status, ConnectionStatus::NotConnected { .. }), "{r:?}");
    }

    #[test]
    fn candidate_json_round_trip() {
        let m = minkowski_strip(f64::NEG_INFINITY, f64::INFINITY, 2).unwrap();
        let r = connect(&m, &Problem { tau0: 0.0, tau1: 2.0, l: vec![1.0, 1.0] }, &coarse()).unwrap();
        let cand = &r.best().unwrap().candidate;
        let text = serde_json::to_string(cand).unwrap();
        let back: GeodesicCandidate = serde_json::from_str(&text).unwrap();
        assert_eq!(back.d, cand.d);
        assert!(back.itinerary.is_empty());
        assert!(verify_connection(&m, &back).unwrap().pass);
    }
}
