//! Independent check of every answer: integrate the geodesic equations
//! `τ'' = −Σ cᵢ fᵢ′/fᵢ³`, `rᵢ' = √cᵢ/fᵢ²` with an embedded 5(4) Runge–Kutta
//! pair and watch for events. The first integral `τ'² = f^ĉ(τ) − D` is only
//! monitored, never imposed.

mod dopri;
mod shoot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connect::GeodesicCandidate;
use crate::model::{ModelError, NormalizationMap, SpacetimeModel, MAX_FACTORS};

pub use shoot::{shooting_reach_map, ShotOutcome, ShotRecord};

/// Escape is declared this close (in normalized coordinate) to an interval end.
pub const ESCAPE_EDGE: f64 = 1e-9;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;
/// Endpoint residual tolerance for a verified connection.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "factor", rename_all = "snake_case")]
pub enum EventKind {
    Turning,
    ReachedTauTarget,
    /// 0-based factor index.
    FiberTarget(usize),
    LeftInterval,
    /// Step size collapsed, typically at a degenerate turning point.
    Diverged,
    /// Step or time budget exhausted.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub tau: f64,
    pub dtau: f64,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub state: Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// `max |τ'² − (f^ĉ(τ) − D)|` over the samples.
    pub first_integral_drift: f64,
}

impl Trajectory {
    pub fn last_event(&self, kind: EventKind) -> Option<&Event> {
        self.events.iter().rev().find(|e| e.kind == kind)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// CSV with columns `t,tau,dtau,r_1,…,r_n`.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.r.len());
        let mut out = String::from("t,tau,dtau");
        for i in 1..=n {
            out.push_str(&format!(",r_{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{},{}", s.t, s.tau, s.dtau));
            for r in &s.r {
                out.push_str(&format!(",{r}"));
            }
            out.push('\n');
        }
        out
    }
}

/// When to stop integrating. Escape and step collapse always stop.
#[derive(Debug, Clone, PartialEq)]
pub struct StopSpec {
    /// Record crossings of this τ; stop at the first one if `stop_at_tau`.
    pub tau_target: Option<f64>,
    pub stop_at_tau: bool,
    /// Per-factor targets for `rᵢ`; `None` ignores the factor.
    pub fiber_targets: Vec<Option<f64>>,
    /// Stop once every fiber target has been met.
    pub stop_at_fibers: bool,
    pub max_turnings: Option<usize>,
    pub t_max: f64,
    pub max_steps: usize,
    /// Keep every accepted step, not just the events.
    pub record_samples: bool,
}

impl StopSpec {
    pub fn fibers(targets: &[f64]) -> StopSpec {
        StopSpec {
            tau_target: None,
            stop_at_tau: false,
            fiber_targets: targets.iter().map(|&l| Some(l)).collect(),
            stop_at_fibers: true,
            max_turnings: None,
            t_max: f64::INFINITY,
            max_steps: DEFAULT_MAX_STEPS,
            record_samples: true,
        }
    }

    pub fn duration(t_max: f64) -> StopSpec {
        StopSpec {
            tau_target: None,
            stop_at_tau: false,
            fiber_targets: Vec::new(),
            stop_at_fibers: false,
            max_turnings: None,
            t_max,
            max_steps: DEFAULT_MAX_STEPS,
            record_samples: true,
        }
    }
}

/// Integrates the geodesic with coefficients `c`, first integral `d`, starting
/// at τ₀ with `τ'(0) = eps·√(f^ĉ(τ₀) − D)` and `rᵢ(0) = 0`.
pub fn integrate_geodesic(
    model: &SpacetimeModel,
    c: &[f64],
    d: f64,
    eps: f64,
    tau0: f64,
    stop: &StopSpec,
) -> Result<Trajectory, OracleError> {
    let n = model.n();
    if c.len() != n || c.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(OracleError::Precondition("coefficients must be nonnegative, one per factor".into()));
    }
    if !model.interval.contains(tau0) {
        return Err(OracleError::Precondition(format!("τ₀ = {tau0} is outside the interval")));
    }
    let sys = dopri::GeodesicSystem::new(model, c, d);
    let f0 = sys.potential(tau0)?;
    let g0 = f0 - d;
    if g0 < -1e-12 * f0.abs().max(d.abs()).max(1.0) {
        return Err(OracleError::Precondition(format!("D = {d} exceeds f^ĉ(τ₀) = {f0}")));
    }
    let mut y = [0.0; 2 + MAX_FACTORS];
    y[0] = tau0;
    y[1] = eps.signum() * g0.max(0.0).sqrt();
    let phi = NormalizationMap::new(&model.interval, tau0);
    Ok(dopri::run(&sys, &phi, y, stop))
}

/// Endpoint residuals of a candidate, integrated independently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub tau_residual: f64,
    pub fiber_residuals: Vec<f64>,
    /// Parameter time of the last target event.
    pub t_final: f64,
    pub first_integral_drift: f64,
    pub diagnostics: Option<String>,
}

impl VerifyReport {
    pub fn max_residual(&self) -> f64 {
        self.fiber_residuals.iter().fold(self.tau_residual, |a, b| a.max(*b))
    }
}

/// Integrates the candidate until all fiber targets are met and compares the
/// final state with the requested endpoint.
pub fn verify_connection(model: &SpacetimeModel, candidate: &GeodesicCandidate) -> Result<VerifyReport, OracleError> {
    if candidate.fake {
        return Err(OracleError::Precondition("fake candidates have no endpoint to verify".into()));
    }
    let n = model.n();
    if candidate.targets.len() != n || candidate.c_hat.c.len() != n {
        return Err(OracleError::Precondition("candidate does not match the model".into()));
    }
    let c = &candidate.c_hat.c;
    let pending: Vec<usize> = (0..n).filter(|&i| candidate.targets[i] > 0.0).collect();
    let mut stop = StopSpec::fibers(&candidate.targets);
    stop.record_samples = false;
    for i in 0..n {
        if candidate.targets[i] <= 0.0 {
            stop.fiber_targets[i] = None;
        }
    }
    if pending.is_empty() && candidate.tau0 == candidate.tau1 {
        return Ok(VerifyReport {
            pass: true,
            tau_residual: 0.0,
            fiber_residuals: vec![0.0; n],
            t_final: 0.0,
            first_integral_drift: 0.0,
            diagnostics: None,
        });
    }
    if pending.is_empty() {
        // Pure base segment: stop when τ reaches the target.
        stop.tau_target = Some(candidate.tau1);
        stop.stop_at_tau = true;
        stop.stop_at_fibers = false;
    }
    let traj = integrate_geodesic(model, c, candidate.d, candidate.eps, candidate.tau0, &stop)?;
    let fail = |why: String, traj: &Trajectory| VerifyReport {
        pass: false,
        tau_residual: f64::INFINITY,
        fiber_residuals: vec![f64::INFINITY; n],
        t_final: traj.events.last().map_or(0.0, |e| e.state.t),
        first_integral_drift: traj.first_integral_drift,
        diagnostics: Some(why),
    };
    let end_state = if pending.is_empty() {
        match traj.last_event(EventKind::ReachedTauTarget) {
            Some(e) => e.state.clone(),
            None => return Ok(fail("τ target never reached".into(), &traj)),
        }
    } else {
        let hits: Vec<&Event> = pending
            .iter()
            .filter_map(|&i| traj.events.iter().find(|e| e.kind == EventKind::FiberTarget(i)))
            .collect();
        if hits.len() < pending.len() {
            let why = match traj.events.last().map(|e| e.kind) {
                Some(EventKind::LeftInterval) => "trajectory left the interval before the fiber targets",
                Some(EventKind::Diverged) => "step size collapsed before the fiber targets",
                _ => "fiber targets not met within the step budget",
            };
            return Ok(fail(why.into(), &traj));
        }
        hits.iter()
            .max_by(|a, b| a.state.t.total_cmp(&b.state.t))
            .map(|e| e.state.clone())
            .expect("pending is nonempty")
    };
    let tau_residual = (end_state.tau - candidate.tau1).abs();
    let fiber_residuals: Vec<f64> = (0..n).map(|i| (end_state.r[i] - candidate.targets[i]).abs()).collect();
    let pass = tau_residual <= VERIFY_TOL && fiber_residuals.iter().all(|r| *r <= VERIFY_TOL);
    Ok(VerifyReport {
        pass,
        tau_residual,
        fiber_residuals,
        t_final: end_state.t,
        first_integral_drift: traj.first_integral_drift,
        diagnostics: None,
    })
}
