use thiserror::Error;

use super::Expr;
use crate::model::{End, Interval};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentEstimate {
    pub exponent: f64,
    /// 1 minus the ratio of residual spread to data spread; close to 1 for a clean power law.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("no exponent estimate: {0}")]
pub struct EstimateError(pub String);

/// Fits `log f` against `log σ` (σ the distance to a finite endpoint, or `|τ|`
/// toward an infinite one) over a geometric sample approaching `end`.
pub fn estimate_endpoint_exponent(
    expr: &Expr,
    interval: &Interval,
    end: End,
) -> Result<ExponentEstimate, EstimateError> {
    let endpoint = interval.endpoint(end);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 10..=40 {
        let (tau, x) = if endpoint.is_finite() {
            let scale = if interval.is_bounded() { interval.width() / 2.0 } else { 1.0 };
            let sigma = scale * 2f64.powi(-k);
            let tau = match end {
                End::A => endpoint + sigma,
                End::B => endpoint - sigma,
            };
            if tau == endpoint {
                continue;
            }
            (tau, sigma.ln())
        } else {
            // Toward infinity the sample grows more gently so that exponential
            // warps stay representable long enough to expose their curvature.
            let reach = 2f64.powf(k as f64 / 4.0);
            let base = match end {
                End::A if interval.b.is_finite() => interval.b.min(0.0),
                End::B if interval.a.is_finite() => interval.a.max(0.0),
                _ => 0.0,
            };
            let tau = match end {
                End::A => base - reach,
                End::B => base + reach,
            };
            (tau, tau.abs().ln())
        };
        match expr.eval(tau) {
            Ok(v) if v.is_finite() && v > 0.0 => {
                xs.push(x);
                ys.push(v.ln());
            }
            Ok(v) if v <= 0.0 => {
                return Err(EstimateError(format!("function is not positive at {tau}")));
            }
            _ => {}
        }
    }
    if xs.len() < 8 {
        return Err(EstimateError("too few finite samples near the endpoint".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    // Spread in log f below FLAT counts as a constant tail, not as misfit.
    const FLAT: f64 = 1e-2;
    let confidence = 1.0 - (ss_res / ss_tot.max(n * FLAT * FLAT)).sqrt();
    Ok(ExponentEstimate {
        exponent: slope,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn power_law_at_finite_endpoint() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let est = estimate_endpoint_exponent(&parse("1/t^2").unwrap(), &iv, End::A).unwrap();
        assert!((est.exponent + 2.0).abs() < 0.01);
        assert!(est.confidence > 0.999);
    }

    #[test]
    fn constant_has_zero_exponent() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let est = estimate_endpoint_exponent(&parse("3").unwrap(), &iv, End::B).unwrap();
        assert!(est.exponent.abs() < 1e-12);
    }

    #[test]
    fn exponential_growth_is_flagged() {
        let iv = Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let est = estimate_endpoint_exponent(&parse("cosh(t)").unwrap(), &iv, End::B).unwrap();
        assert!(est.confidence < 0.9, "confidence {}", est.confidence);
        let est = estimate_endpoint_exponent(&parse("t^2+1").unwrap(), &iv, End::B).unwrap();
        assert!((est.exponent - 2.0).abs() < 0.05 && est.confidence > 0.99);
    }
}
