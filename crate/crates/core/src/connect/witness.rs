//! Non-connectable pairs for a single warped factor whose inverse warp is
//! integrable at the lower end (the black-hole interior with only its radial
//! factor kept).

use serde::Serialize;

use super::{connect, ConnectError, ConnectOptions, ConnectionStatus, Problem};
use crate::model::SpacetimeModel;
use crate::quad::h_segment;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedWitness {
    pub tau0: f64,
    pub tau1: f64,
    pub l1: f64,
    /// `∫ 1/f₁` from the lower end to τ₀.
    pub integral: f64,
}

/// `∫ 1/f₁` from the lower end to `tau`, i.e. the fiber progress of a null
/// geodesic falling into the lower end.
fn null_fall(model: &SpacetimeModel, tau: f64) -> Result<f64, ConnectError> {
    Ok(h_segment(model, &[1.0], 0.0, 0, model.interval.a, tau)?)
}

/// Finds `τ₀` with `∫ 1/f₁ < l₁` below it, then moves `τ₁` towards the lower
/// end until the pair is reported not connected.
pub fn schwarzschild_reduced_witness(
    model: &SpacetimeModel,
    l1: f64,
    opts: &ConnectOptions,
) -> Result<ReducedWitness, ConnectError> {
    if model.n() != 1 {
        return Err(ConnectError::Precondition("the witness search needs a single factor".into()));
    }
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(ConnectError::Precondition("l₁ must be positive".into()));
    }
    let iv = model.interval;
    if !iv.a.is_finite() {
        return Err(ConnectError::Precondition("the lower end must be finite".into()));
    }
    // Aim for half the budget so the margin survives the rest of the path.
    let goal = 0.5 * l1;
    let mut hi = if iv.b.is_finite() { 0.5 * (iv.a + iv.b) } else { iv.a + 1.0 };
    let mut lo = iv.a;
    if null_fall(model, hi)? > goal {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if null_fall(model, mid)? > goal {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        lo = hi;
    }
    let tau0 = lo;
    let integral = null_fall(model, tau0)?;
    if !(integral < l1) || tau0 <= iv.a {
        return Err(ConnectError::Numerical("no base point with a short enough fall".into()));
    }
    for k in 1..=40 {
        let tau1 = iv.a + (tau0 - iv.a) * 0.5f64.powi(k);
        let report = connect(
            model,
            &Problem {
                tau0,
                tau1,
                l: vec![l1],
            },
            opts,
        )?;
        if matches!(report.status, ConnectionStatus::NotConnected { .. }) {
            return Ok(ReducedWitness {
                tau0,
                tau1,
                l1,
                integral,
            });
        }
    }
    Err(ConnectError::Numerical("no non-connectable pair found towards the lower end".into()))
}
