//! Adaptive Gauss–Kronrod quadrature for vector integrands and Brent's root finder.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::MAX_FACTORS;

pub(crate) type Vals = [f64; MAX_FACTORS];

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            abs: 1e-10,
            rel: 1e-8,
            max_segments: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
/// Best estimate; returned even when the segment budget runs out.
pub(crate) struct Quad {
    pub value: Vals,
}

struct Segment {
    lo: f64,
    hi: f64,
    value: Vals,
    error: Vals,
    worst: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

fn kronrod<E, F>(f: &mut F, n: usize, lo: f64, hi: f64) -> Result<(Vals, Vals), E>
where
    F: FnMut(f64, &mut Vals) -> Result<(), E>,
{
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut k = [0.0; MAX_FACTORS];
    let mut g = [0.0; MAX_FACTORS];
    let mut buf = [0.0; MAX_FACTORS];
    f(c, &mut buf)?;
    for j in 0..n {
        k[j] = WGK[7] * buf[j];
        g[j] = WG[3] * buf[j];
    }
    for i in 0..7 {
        let dx = h * XGK[i];
        let mut left = [0.0; MAX_FACTORS];
        f(c - dx, &mut left)?;
        f(c + dx, &mut buf)?;
        for j in 0..n {
            let s = left[j] + buf[j];
            k[j] += WGK[i] * s;
            if i % 2 == 1 {
                g[j] += WG[i / 2] * s;
            }
        }
    }
    let mut err = [0.0; MAX_FACTORS];
    for j in 0..n {
        k[j] *= h;
        err[j] = (k[j] - g[j] * h).abs();
    }
    Ok((k, err))
}

/// Integrates the first `n` components of `f` over `[lo, hi]`.
///
/// Subdivides the segment with the largest scaled error until every component
/// meets `max(abs, rel·|value|)` or the segment budget is spent.
pub(crate) fn integrate<E, F>(mut f: F, n: usize, lo: f64, hi: f64, tol: QuadTol) -> Result<Quad, E>
where
    F: FnMut(f64, &mut Vals) -> Result<(), E>,
{
    if hi == lo {
        return Ok(Quad { value: [0.0; MAX_FACTORS] });
    }
    let scaled = |e: &Vals, v: &Vals| -> f64 {
        (0..n)
            .map(|j| e[j] / tol.abs.max(tol.rel * v[j].abs()))
            .fold(0.0, f64::max)
    };
    let (v, e) = kronrod(&mut f, n, lo, hi)?;
    let (mut value, mut error) = (v, e);
    if (0..n).all(|j| error[j] <= tol.abs.max(tol.rel * value[j].abs())) {
        return Ok(Quad { value });
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        lo,
        hi,
        value: v,
        error: e,
        worst: 1.0,
    });
    let mut segments = 1;
    loop {
        let done = (0..n).all(|j| error[j] <= tol.abs.max(tol.rel * value[j].abs()));
        if done {
            return Ok(Quad { value });
        }
        if segments >= tol.max_segments {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo.min(seg.hi) || mid >= seg.lo.max(seg.hi) {
            // The worst segment can no longer be split in floating point.
            break;
        }
        let (lv, le) = kronrod(&mut f, n, seg.lo, mid)?;
        let (rv, re) = kronrod(&mut f, n, mid, seg.hi)?;
        for j in 0..n {
            value[j] += lv[j] + rv[j] - seg.value[j];
            error[j] += le[j] + re[j] - seg.error[j];
        }
        heap.push(Segment {
            lo: seg.lo,
            hi: mid,
            value: lv,
            error: le,
            worst: scaled(&le, &value),
        });
        heap.push(Segment {
            lo: mid,
            hi: seg.hi,
            value: rv,
            error: re,
            worst: scaled(&re, &value),
        });
        segments += 1;
        // Sum of segment errors can drift from rounding; recompute occasionally.
        if segments % 64 == 0 {
            error = [0.0; MAX_FACTORS];
            value = [0.0; MAX_FACTORS];
            for s in heap.iter() {
                for j in 0..n {
                    value[j] += s.value[j];
                    error[j] += s.error[j];
                }
            }
        }
    }
    Ok(Quad { value })
}

/// Brent's method on a sign-changing bracket. Without a sign change the
/// endpoint with the smaller residual is returned.
pub(crate) fn brent<E, F>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Ok(if fa.abs() <= fb.abs() { a } else { b });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok(b)
}
