//! Brute-force reach map: shoot geodesics over a grid of initial data and
//! record where each lands.

use rayon::prelude::*;
use serde::Serialize;

use super::{integrate_geodesic, EventKind, OracleError, StopSpec};
use crate::model::{End, NormalizationMap, SpacetimeModel};
use crate::quad::f_hat;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShotOutcome {
    /// `tau` is the base coordinate when factor 1 reaches its target;
    /// `per_fiber[i]` the same for factor `i`.
    Reached { tau: f64, per_fiber: Vec<f64> },
    Escaped { end: End },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRecord {
    pub c: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub outcome: ShotOutcome,
}

fn shoot(model: &SpacetimeModel, tau0: f64, l: &[f64], c: &[f64], k: f64) -> ShotOutcome {
    let f0 = match f_hat(model, c, tau0) {
        Ok(f) => f,
        Err(e) => return ShotOutcome::Failed { reason: e.to_string() },
    };
    let d = f0 - k.abs();
    let eps = if k < 0.0 { -1.0 } else { 1.0 };
    let mut stop = StopSpec::fibers(l);
    stop.record_samples = false;
    let traj = match integrate_geodesic(model, c, d, eps, tau0, &stop) {
        Ok(t) => t,
        Err(e) => return ShotOutcome::Failed { reason: e.to_string() },
    };
    let per_fiber: Option<Vec<f64>> = (0..l.len())
        .map(|i| traj.last_event(EventKind::FiberTarget(i)).map(|e| e.state.tau))
        .collect();
    if let Some(per_fiber) = per_fiber {
        return ShotOutcome::Reached {
            tau: per_fiber[0],
            per_fiber,
        };
    }
    match traj.events.last() {
        Some(e) if e.kind == EventKind::LeftInterval => {
            let phi = NormalizationMap::new(&model.interval, tau0);
            let end = if phi.forward(e.state.tau) < 0.0 { End::A } else { End::B };
            ShotOutcome::Escaped { end }
        }
        Some(e) => ShotOutcome::Failed {
            reason: format!("stopped by {:?} before the fiber targets", e.kind),
        },
        None => ShotOutcome::Failed {
            reason: "no events".into(),
        },
    }
}

/// Shoots from τ₀ for every pair of `c_samples × k_samples` (c outer, K inner).
/// `K` sets `D = f^ĉ(τ₀) − |K|` and the initial direction `sign K`.
pub fn shooting_reach_map(
    model: &SpacetimeModel,
    tau0: f64,
    l: &[f64],
    k_samples: &[f64],
    c_samples: &[Vec<f64>],
) -> Result<Vec<ShotRecord>, OracleError> {
    if l.len() != model.n() || c_samples.iter().any(|c| c.len() != model.n()) {
        return Err(OracleError::Precondition("dimension mismatch with the model".into()));
    }
    if !model.interval.contains(tau0) {
        return Err(OracleError::Precondition(format!("τ₀ = {tau0} is outside the interval")));
    }
    let jobs: Vec<(&Vec<f64>, f64)> = c_samples
        .iter()
        .flat_map(|c| k_samples.iter().map(move |&k| (c, k)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(c, k)| ShotRecord {
            c: c.clone(),
            k,
            outcome: shoot(model, tau0, l, c, k),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::de_sitter_grw;

    #[test]
    fn de_sitter_reach_matches_closed_form() {
        let ds = de_sitter_grw().unwrap();
        let l = 0.7f64;
        let ks = [0.25, 0.5, -0.5];
        let recs = shooting_reach_map(&ds, 0.0, &[l], &ks, &[vec![1.0]]).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            let ShotOutcome::Reached { tau, .. } = r.outcome else {
                panic!("{:?}", r.outcome)
            };
            let expect = (r.k.abs().sqrt() * l.sin()).atanh() * r.k.signum();
            assert!((tau - expect).abs() < 1e-8, "K={} got {tau} want {expect}", r.k);
        }
    }

    #[test]
    fn escape_above_the_critical_energy() {
        let ds = de_sitter_grw().unwrap();
        let recs = shooting_reach_map(&ds, 0.0, &[3.0], &[2.0, -2.0], &[vec![1.0]]).unwrap();
        assert_eq!(recs[0].outcome, ShotOutcome::Escaped { end: End::B });
        assert_eq!(recs[1].outcome, ShotOutcome::Escaped { end: End::A });
    }
}
