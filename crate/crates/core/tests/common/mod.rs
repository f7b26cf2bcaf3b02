//! Seeded generators shared by the integration tests.

#![allow(dead_code)]

use mwc::funcparse::{Expr, Func};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn boxed(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// Nonnegative literal; a leading minus always parses as negation.
fn any_literal(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..6) {
        0 => rng.gen_range(0..10) as f64,
        1 => (rng.gen_range(0.0..100.0f64) * 100.0).round() / 100.0,
        2 => rng.gen_range(0.0..1.0),
        3 => 10f64.powi(rng.gen_range(-12..-5)) * rng.gen_range(1.0..10.0),
        4 => 10f64.powi(rng.gen_range(16..40)) * rng.gen_range(1.0..10.0),
        _ => rng.gen_range(1e5..1e15),
    }
}

/// Arbitrary well-formed tree of depth at most `max_depth`.
pub fn random_expr(rng: &mut ChaCha8Rng, max_depth: usize) -> Expr {
    if max_depth <= 1 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.5) { Expr::Var } else { Expr::Num(any_literal(rng)) };
    }
    let d = max_depth - 1;
    match rng.gen_range(0..8) {
        0 => Expr::Neg(boxed(random_expr(rng, d))),
        1 => Expr::Add(boxed(random_expr(rng, d)), boxed(random_expr(rng, d))),
        2 => Expr::Sub(boxed(random_expr(rng, d)), boxed(random_expr(rng, d))),
        3 => Expr::Mul(boxed(random_expr(rng, d)), boxed(random_expr(rng, d))),
        4 => Expr::Div(boxed(random_expr(rng, d)), boxed(random_expr(rng, d))),
        5 => Expr::Pow(boxed(random_expr(rng, d)), boxed(random_expr(rng, d))),
        _ => {
            let f = *Func::ALL.choose(rng).expect("nonempty");
            Expr::Apply(f, boxed(random_expr(rng, d)))
        }
    }
}

/// Tree with moderate literals and exponents, so values stay in a range where
/// finite differences are meaningful.
pub fn random_smooth_expr(rng: &mut ChaCha8Rng, max_depth: usize) -> Expr {
    let lit = |rng: &mut ChaCha8Rng| (rng.gen_range(0.1..3.0f64) * 100.0).round() / 100.0;
    if max_depth <= 1 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.6) { Expr::Var } else { Expr::Num(lit(rng)) };
    }
    let d = max_depth - 1;
    match rng.gen_range(0..8) {
        0 => Expr::Neg(boxed(random_smooth_expr(rng, d))),
        1 => Expr::Add(boxed(random_smooth_expr(rng, d)), boxed(random_smooth_expr(rng, d))),
        2 => Expr::Sub(boxed(random_smooth_expr(rng, d)), boxed(random_smooth_expr(rng, d))),
        3 => Expr::Mul(boxed(random_smooth_expr(rng, d)), boxed(random_smooth_expr(rng, d))),
        4 => Expr::Div(boxed(random_smooth_expr(rng, d)), boxed(random_smooth_expr(rng, d))),
        5 => {
            let exponent = if rng.gen_bool(0.5) {
                Expr::Num(rng.gen_range(1..4) as f64)
            } else if rng.gen_bool(0.5) {
                Expr::Num(lit(rng))
            } else {
                random_smooth_expr(rng, 2)
            };
            Expr::Pow(boxed(random_smooth_expr(rng, d)), boxed(exponent))
        }
        _ => {
            let f = *Func::ALL.choose(rng).expect("nonempty");
            Expr::Apply(f, boxed(random_smooth_expr(rng, d)))
        }
    }
}

/// Point on the standard simplex `Σcᵢ = 1` with every entry at least `floor`.
pub fn simplex_point(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12..1.0f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let scale = 1.0 - floor * n as f64;
    raw.iter().map(|x| floor + scale * x / total).collect()
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Central difference with one Richardson step.
pub fn richardson(f: &dyn Fn(f64) -> Option<f64>, t: f64, h: f64) -> Option<f64> {
    let central = |h: f64| Some((f(t + h)? - f(t - h)?) / (2.0 * h));
    let (d1, d2) = (central(h)?, central(0.5 * h)?);
    Some((4.0 * d2 - d1) / 3.0)
}
