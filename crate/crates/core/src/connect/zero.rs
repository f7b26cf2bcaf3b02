//! Zero set of the matching defects over `(ŷ, K)`, traced slice by slice in
//! `K` and linked into connected components.

use rayon::prelude::*;
use serde::Serialize;

use super::mu::{k_bounds, KBand, MuEval, MuSample};
use super::{ConnectError, Problem};
use crate::model::{End, SpacetimeModel};
use crate::numeric::brent;

/// `max |μᵢ|` accepted at a root.
pub const ROOT_TOL: f64 = 1e-6;
/// Target accuracy of the reached τ after refinement.
pub const REACH_TOL: f64 = 1e-8;
/// Coefficient coordinates stay this far inside `(0, 1)`.
const Y_EDGE: f64 = 1e-9;
const MAX_BRACKETS: usize = 16;
const MAX_HITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub k_steps: usize,
    pub c_steps: usize,
}

impl Resolution {
    pub fn default_for(n: usize) -> Resolution {
        match n {
            0..=2 => Resolution {
                k_steps: 129,
                c_steps: 257,
            },
            _ => Resolution {
                k_steps: 65,
                c_steps: 65,
            },
        }
    }

    pub fn scaled(self, factor: usize) -> Resolution {
        Resolution {
            k_steps: (self.k_steps - 1) * factor + 1,
            c_steps: (self.c_steps + 1) * factor - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Contact {
    /// Reaches the `K⁺` slice.
    Top,
    /// Reaches the `K⁻` slice.
    Bottom,
    /// Contains fake nodes escaping through the upper end.
    FakeUpper,
    /// Contains fake nodes escaping through the lower end.
    FakeLower,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroNode {
    pub y: Vec<f64>,
    #[serde(rename = "K")]
    pub k: f64,
    pub slice: usize,
    pub reached_tau: Option<f64>,
    pub fake: bool,
    pub escape_end: Option<End>,
    /// `max |μᵢ|` at the node.
    pub residual: f64,
}

impl ZeroNode {
    fn from_sample(s: &MuSample, slice: usize) -> ZeroNode {
        ZeroNode {
            y: s.y.clone(),
            k: s.k,
            slice,
            reached_tau: s.reached_tau,
            fake: s.fake,
            escape_end: s.escape_end,
            residual: s.mu_norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroComponent {
    pub nodes: Vec<ZeroNode>,
    /// Index pairs into `nodes`, joining neighbours on adjacent slices.
    pub edges: Vec<(usize, usize)>,
    pub boundary_contacts: Vec<Contact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSet {
    pub components: Vec<ZeroComponent>,
    pub band: KBand,
    pub k_grid: Vec<f64>,
    pub resolution: Resolution,
    /// Slices without any root.
    pub empty_slices: usize,
    /// Samples or root solves that failed numerically.
    pub failures: usize,
}

impl ZeroSet {
    pub fn node_count(&self) -> usize {
        self.components.iter().map(|c| c.nodes.len()).sum()
    }
}

/// Hull of the base coordinates reached along the zero set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachedInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    /// Ends through which fake nodes escape.
    pub fake_ends: Vec<End>,
}

impl ReachedInterval {
    pub fn contains(&self, tau: f64) -> bool {
        let above = if self.lo_closed { tau >= self.lo } else { tau > self.lo };
        let below = if self.hi_closed { tau <= self.hi } else { tau < self.hi };
        above && below
    }
}

pub(crate) fn k_grid(band: &KBand, k_steps: usize) -> Vec<f64> {
    let steps = k_steps.max(2);
    (0..steps)
        .map(|j| {
            if 2 * j + 1 == steps {
                0.0
            } else {
                band.k_minus + (band.k_plus - band.k_minus) * j as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Coefficient grid in chart coordinates; the last coordinate varies fastest.
/// Points cluster at the faces, where zero curves pile up when the warps at τ₀
/// differ by orders of magnitude.
pub(crate) fn y_grid(n: usize, c_steps: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (1..=c_steps)
        .map(|j| {
            if 2 * j == c_steps + 1 {
                0.5
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (c_steps + 1) as f64).cos())
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

fn failed_sample(y: &[f64], k: f64, n: usize) -> MuSample {
    MuSample {
        y: y.to_vec(),
        k,
        mu: vec![f64::NAN; n - 1],
        s1: f64::NAN,
        fake: false,
        escape_end: None,
        reached_tau: None,
        terminal: None,
    }
}

/// Samples at every grid point, indexed `[point][slice]`. Failed evaluations
/// come back as NaN samples.
fn sample_table(ev: &MuEval<'_>, ys: &[Vec<f64>], ks: &[f64]) -> Vec<Vec<MuSample>> {
    let n = ev.n();
    ys.par_iter()
        .map(|y| match ev.column_at(y) {
            Ok(col) => ks
                .iter()
                .map(|&k| ev.sample(&col, y, k).unwrap_or_else(|_| failed_sample(y, k, n)))
                .collect(),
            Err(_) => ks.iter().map(|&k| failed_sample(y, k, n)).collect(),
        })
        .collect()
}

fn check_problem(model: &SpacetimeModel, problem: &Problem, res: Resolution) -> Result<(), ConnectError> {
    if model.n() > 3 {
        return Err(ConnectError::Unsupported(format!(
            "zero-set continuation handles up to 3 factors, got {}",
            model.n()
        )));
    }
    if res.k_steps < 2 || res.c_steps < 2 {
        return Err(ConnectError::Config("resolution needs at least 2 steps per axis".into()));
    }
    if !model.interval.contains(problem.tau0) {
        return Err(ConnectError::Precondition(format!("τ₀ = {} is outside the interval", problem.tau0)));
    }
    Ok(())
}

/// Samples of `μ` on the full grid, slice by slice in `K`, then over `ŷ`.
pub fn mu_map(model: &SpacetimeModel, problem: &Problem, res: Resolution) -> Result<Vec<MuSample>, ConnectError> {
    if model.n() < 2 {
        return Err(ConnectError::Config("the μ map needs at least 2 factors".into()));
    }
    check_problem(model, problem, res)?;
    let ev = MuEval::new(model, problem)?;
    let ks = k_grid(&k_bounds(model, problem.tau0)?, res.k_steps);
    let ys = y_grid(model.n(), res.c_steps);
    let table = sample_table(&ev, &ys, &ks);
    Ok((0..ks.len()).flat_map(|j| table.iter().map(move |col| col[j].clone())).collect())
}

fn nan_to_err(x: f64) -> Result<f64, ConnectError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConnectError::Numerical("μ is undefined here".into()))
    }
}

/// Root of `μ₂(·, K)` inside `[lo, hi]`, whose ends have opposite signs.
fn root_in(ev: &MuEval<'_>, lo: f64, hi: f64, k: f64) -> Result<MuSample, ConnectError> {
    let y = brent(|y| nan_to_err(ev.sample_at(&[y], k)?.mu[0]), lo, hi, 1e-15, 200)?;
    let s = ev.sample_at(&[y], k)?;
    if s.mu_norm() > ROOT_TOL {
        return Err(ConnectError::Numerical(format!("sign change without a root near y = {y}")));
    }
    Ok(s)
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Newton iteration on `μ(·, K) = 0` with a forward-difference Jacobian.
fn newton(ev: &MuEval<'_>, start: &[f64], k: f64) -> Result<MuSample, ConnectError> {
    let m = start.len();
    let mut y = start.to_vec();
    let mut s = ev.sample_at(&y, k)?;
    for _ in 0..20 {
        if !s.is_finite() {
            break;
        }
        if s.mu_norm() <= 1e-13 {
            return Ok(s);
        }
        let mut jac = vec![vec![0.0; m]; m];
        for j in 0..m {
            let h = if y[j] > 0.5 { -1e-7 } else { 1e-7 };
            let mut yh = y.clone();
            yh[j] += h;
            let sh = ev.sample_at(&yh, k)?;
            for i in 0..m {
                jac[i][j] = (sh.mu[i] - s.mu[i]) / h;
            }
        }
        let Some(mut dy) = solve_linear(jac, s.mu.iter().map(|x| -x).collect()) else {
            break;
        };
        let big = dy.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if big > 0.1 {
            dy.iter_mut().for_each(|d| *d *= 0.1 / big);
        }
        for j in 0..m {
            y[j] = (y[j] + dy[j]).clamp(Y_EDGE, 1.0 - Y_EDGE);
        }
        s = ev.sample_at(&y, k)?;
    }
    if s.is_finite() && s.mu_norm() <= ROOT_TOL {
        Ok(s)
    } else {
        Err(ConnectError::Numerical(format!("Newton did not converge at K = {k}")))
    }
}

/// Re-solves `μ(·, K) = 0` near `guess`.
pub(crate) fn solve_y(ev: &MuEval<'_>, guess: &[f64], k: f64, c_steps: usize) -> Result<MuSample, ConnectError> {
    match guess.len() {
        0 => ev.sample_at(&[], k),
        1 => {
            let g = guess[0];
            let mut w = 1.0 / (c_steps + 1) as f64;
            for _ in 0..12 {
                let (lo, hi) = ((g - w).max(Y_EDGE), (g + w).min(1.0 - Y_EDGE));
                let (fl, fh) = (ev.sample_at(&[lo], k)?.mu[0], ev.sample_at(&[hi], k)?.mu[0]);
                if fl.is_finite() && fh.is_finite() && fl * fh <= 0.0 {
                    return root_in(ev, lo, hi, k);
                }
                w *= 2.0;
            }
            Err(ConnectError::Numerical(format!("lost the zero curve at K = {k}")))
        }
        _ => newton(ev, guess, k),
    }
}

/// Roots on one `K` slice from its column of samples.
fn slice_roots(ev: &MuEval<'_>, table: &[Vec<MuSample>], j: usize, k: f64, c_steps: usize) -> (Vec<MuSample>, usize) {
    let n = ev.n();
    let mut roots = Vec::new();
    let mut failures = 0;
    match n {
        1 => {
            let s = &table[0][j];
            if s.is_finite() {
                roots.push(s.clone());
            } else {
                failures += 1;
            }
        }
        2 => {
            let col: Vec<&MuSample> = table.iter().map(|p| &p[j]).collect();
            for p in 0..col.len() {
                let a = col[p].mu[0];
                if a == 0.0 {
                    roots.push(col[p].clone());
                    continue;
                }
                let Some(next) = col.get(p + 1) else { break };
                let b = next.mu[0];
                if a.is_finite() && b.is_finite() && a * b < 0.0 {
                    match root_in(ev, col[p].y[0], next.y[0], k) {
                        Ok(s) => roots.push(s),
                        Err(_) => failures += 1,
                    }
                }
            }
        }
        _ => {
            // Two triangles per grid cell; a linear zero inside one seeds Newton.
            let c = c_steps;
            let at = |a: usize, b: usize| &table[a * c + b][j];
            let radius = 0.5 / (c + 1) as f64;
            for a in 0..c - 1 {
                for b in 0..c - 1 {
                    for tri in [[(a, b), (a + 1, b), (a, b + 1)], [(a + 1, b + 1), (a, b + 1), (a + 1, b)]] {
                        let v: Vec<&MuSample> = tri.iter().map(|&(p, q)| at(p, q)).collect();
                        if v.iter().any(|s| !s.is_finite()) {
                            continue;
                        }
                        let col1 = [v[1].mu[0] - v[0].mu[0], v[1].mu[1] - v[0].mu[1]];
                        let col2 = [v[2].mu[0] - v[0].mu[0], v[2].mu[1] - v[0].mu[1]];
                        let det = col1[0] * col2[1] - col2[0] * col1[1];
                        if det == 0.0 {
                            continue;
                        }
                        let (r0, r1) = (-v[0].mu[0], -v[0].mu[1]);
                        let u = (r0 * col2[1] - col2[0] * r1) / det;
                        let w = (col1[0] * r1 - r0 * col1[1]) / det;
                        if u < 0.0 || w < 0.0 || u + w > 1.0 {
                            continue;
                        }
                        let guess: Vec<f64> = (0..2)
                            .map(|d| v[0].y[d] + u * (v[1].y[d] - v[0].y[d]) + w * (v[2].y[d] - v[0].y[d]))
                            .collect();
                        match newton(ev, &guess, k) {
                            Ok(s) => {
                                let dup = roots.iter().any(|r: &MuSample| {
                                    r.y.iter().zip(&s.y).all(|(p, q)| (p - q).abs() <= radius)
                                });
                                if !dup {
                                    roots.push(s);
                                }
                            }
                            Err(_) => failures += 1,
                        }
                    }
                }
            }
        }
    }
    (roots, failures)
}

/// Cell `p` with `axis[p] < y < axis[p + 1]`.
fn cell_of(axis: &[f64], y: f64) -> Option<usize> {
    let p = axis.partition_point(|v| *v < y);
    (p >= 1 && p < axis.len() && axis[p] > y).then(|| p - 1)
}

/// Follows the zero contour of `μ₂` entering the row of cells between slices
/// `j` and `j + 1` through the root at `y` on slice `j`, and returns the cell
/// where it leaves through slice `j + 1`. `None` when it turns back, runs into
/// a face, meets a failed sample or an ambiguous saddle cell.
fn contour_step(table: &[Vec<MuSample>], axis: &[f64], j: usize, y: f64) -> Option<usize> {
    let sign = |p: usize, row: usize| -> Option<bool> {
        let v = table[p][row].mu[0];
        v.is_finite().then_some(v < 0.0)
    };
    let crosses = |p: usize, q: usize, r0: usize, r1: usize| -> Option<bool> { Some(sign(p, r0)? != sign(q, r1)?) };
    let cells = axis.len().checked_sub(1)?;
    let mut p = cell_of(axis, y)?;
    if !crosses(p, p + 1, j, j)? {
        return None;
    }
    // The edge the contour came through: 0 bottom, 1 left, 2 right.
    let mut from = 0;
    for _ in 0..=cells {
        let mut exits = Vec::with_capacity(3);
        if crosses(p, p + 1, j + 1, j + 1)? {
            exits.push(3);
        }
        if from != 1 && crosses(p, p, j, j + 1)? {
            exits.push(1);
        }
        if from != 2 && crosses(p + 1, p + 1, j, j + 1)? {
            exits.push(2);
        }
        if from != 0 && crosses(p, p + 1, j, j)? {
            exits.push(0);
        }
        match exits[..] {
            [3] => return Some(p),
            [1] if p > 0 => {
                p -= 1;
                from = 2;
            }
            [2] if p + 1 < cells => {
                p += 1;
                from = 1;
            }
            _ => return None,
        }
    }
    None
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Traces the zero set of `μ₂ … μₙ` over the `(ŷ, K)` rectangle. Roots on
/// neighbouring slices closer than `2/c_steps` in every chart coordinate are
/// linked; components are returned largest first.
pub fn zero_component(model: &SpacetimeModel, problem: &Problem, res: Resolution) -> Result<ZeroSet, ConnectError> {
    check_problem(model, problem, res)?;
    let n = model.n();
    let ev = MuEval::new(model, problem)?;
    let band = k_bounds(model, problem.tau0)?;
    let ks = k_grid(&band, res.k_steps);
    let ys = y_grid(n, res.c_steps);
    let table = sample_table(&ev, &ys, &ks);
    let table_failures = table.iter().flatten().filter(|s| !s.is_finite()).count();
    let per_slice: Vec<(Vec<MuSample>, usize)> = ks
        .par_iter()
        .enumerate()
        .map(|(j, &k)| slice_roots(&ev, &table, j, k, res.c_steps))
        .collect();

    let mut nodes = Vec::new();
    let mut failures = table_failures;
    let mut empty_slices = 0;
    let mut slice_start = Vec::with_capacity(ks.len() + 1);
    for (j, (roots, fails)) in per_slice.iter().enumerate() {
        slice_start.push(nodes.len());
        failures += fails;
        if roots.is_empty() {
            empty_slices += 1;
        }
        nodes.extend(roots.iter().map(|s| ZeroNode::from_sample(s, j)));
    }
    slice_start.push(nodes.len());

    let radius = 2.0 / res.c_steps as f64;
    let axis: Vec<f64> = if n == 2 { ys.iter().map(|y| y[0]).collect() } else { Vec::new() };
    let mut edges = Vec::new();
    for j in 0..ks.len().saturating_sub(1) {
        for a in slice_start[j]..slice_start[j + 1] {
            let traced = if n == 2 { contour_step(&table, &axis, j, nodes[a].y[0]) } else { None };
            for b in slice_start[j + 1]..slice_start[j + 2] {
                let close = nodes[a].y.iter().zip(&nodes[b].y).all(|(p, q)| (p - q).abs() <= radius);
                let follows = traced.is_some_and(|q| cell_of(&axis, nodes[b].y[0]) == Some(q));
                if close || follows {
                    edges.push((a, b));
                }
            }
        }
    }
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    for &(a, b) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![usize::MAX; nodes.len()];
    for i in 0..nodes.len() {
        let r = find(&mut parent, i);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[group_of[r]].push(i);
    }
    let last = ks.len() - 1;
    let mut components: Vec<ZeroComponent> = groups
        .into_iter()
        .map(|members| {
            let mut local = vec![usize::MAX; nodes.len()];
            for (pos, &i) in members.iter().enumerate() {
                local[i] = pos;
            }
            let comp_edges = edges
                .iter()
                .filter(|(a, _)| local[*a] != usize::MAX)
                .map(|&(a, b)| (local[a], local[b]))
                .collect();
            let comp_nodes: Vec<ZeroNode> = members.iter().map(|&i| nodes[i].clone()).collect();
            let mut contacts = Vec::new();
            if comp_nodes.iter().any(|v| v.slice == last) {
                contacts.push(Contact::Top);
            }
            if comp_nodes.iter().any(|v| v.slice == 0) {
                contacts.push(Contact::Bottom);
            }
            if comp_nodes.iter().any(|v| v.escape_end == Some(End::B)) {
                contacts.push(Contact::FakeUpper);
            }
            if comp_nodes.iter().any(|v| v.escape_end == Some(End::A)) {
                contacts.push(Contact::FakeLower);
            }
            ZeroComponent {
                nodes: comp_nodes,
                edges: comp_edges,
                boundary_contacts: contacts,
            }
        })
        .collect();
    components.sort_by_key(|c| std::cmp::Reverse(c.nodes.len()));
    Ok(ZeroSet {
        components,
        band,
        k_grid: ks,
        resolution: res,
        empty_slices,
        failures,
    })
}

/// Hull of the reached base coordinates over non-fake nodes. With
/// `extend_fake`, an end through which fake nodes escape is added as an open end.
pub fn reached_interval(model: &SpacetimeModel, zs: &ZeroSet, extend_fake: bool) -> Option<ReachedInterval> {
    let nodes = || zs.components.iter().flat_map(|c| &c.nodes);
    let reached: Vec<f64> = nodes().filter(|v| !v.fake).filter_map(|v| v.reached_tau).collect();
    let mut fake_ends: Vec<End> = nodes().filter_map(|v| v.escape_end).collect();
    fake_ends.sort();
    fake_ends.dedup();
    let mut j = if reached.is_empty() {
        if !extend_fake || fake_ends.is_empty() {
            return None;
        }
        let e = model.interval.endpoint(fake_ends[0]);
        ReachedInterval {
            lo: e,
            hi: e,
            lo_closed: false,
            hi_closed: false,
            fake_ends: Vec::new(),
        }
    } else {
        ReachedInterval {
            lo: reached.iter().copied().fold(f64::INFINITY, f64::min),
            hi: reached.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lo_closed: true,
            hi_closed: true,
            fake_ends: Vec::new(),
        }
    };
    if extend_fake {
        for &end in &fake_ends {
            match end {
                End::A => {
                    j.lo = model.interval.a;
                    j.lo_closed = false;
                }
                End::B => {
                    j.hi = model.interval.b;
                    j.hi_closed = false;
                }
            }
        }
    }
    j.fake_ends = fake_ends;
    Some(j)
}

/// A refined zero-set point whose reached τ matches the target.
#[derive(Debug, Clone)]
pub(crate) struct Hit {
    pub sample: MuSample,
}

/// Refines linked node pairs whose reached τ brackets `tau1`, by root finding
/// in `K` while following the zero curve. Results come ordered by `|K|`, then `ŷ`.
pub(crate) fn refine_to(ev: &MuEval<'_>, zs: &ZeroSet, tau1: f64) -> Vec<Hit> {
    let c_steps = zs.resolution.c_steps;
    let iv = &ev.model.interval;
    let mut hits: Vec<Hit> = Vec::new();
    let mut brackets: Vec<(&ZeroNode, &ZeroNode)> = Vec::new();
    for comp in &zs.components {
        for v in &comp.nodes {
            if let (false, Some(r)) = (v.fake, v.reached_tau) {
                if (r - tau1).abs() <= REACH_TOL && v.residual <= ROOT_TOL {
                    if let Ok(s) = solve_y(ev, &v.y, v.k, c_steps) {
                        hits.push(Hit { sample: s });
                    }
                }
            }
        }
        for &(a, b) in &comp.edges {
            let (va, vb) = (&comp.nodes[a], &comp.nodes[b]);
            let (Some(ga), Some(gb)) = (overshoot(iv, va.reached_tau, va.escape_end, tau1), overshoot(iv, vb.reached_tau, vb.escape_end, tau1)) else {
                continue;
            };
            if ga * gb < 0.0 {
                brackets.push((va, vb));
            }
        }
    }
    brackets.sort_by(|x, y| {
        let kx = x.0.k.abs().min(x.1.k.abs());
        let ky = y.0.k.abs().min(y.1.k.abs());
        kx.total_cmp(&ky).then_with(|| lex(&x.0.y, &y.0.y))
    });
    for (va, vb) in brackets.into_iter().take(MAX_BRACKETS) {
        if hits.len() >= MAX_HITS {
            break;
        }
        let mut guess = va.y.clone();
        let solve = |k: f64, guess: &mut Vec<f64>| -> Result<MuSample, ConnectError> {
            let s = solve_y(ev, guess, k, c_steps)?;
            *guess = s.y.clone();
            Ok(s)
        };
        // Shrink a bracket with a fake end until both ends reach τ; the
        // reached τ runs continuously into the escape end, so τ₁ is passed
        // before the path turns fake.
        let (mut ka, mut kb) = (va.k, vb.k);
        let mut ga = overshoot(iv, va.reached_tau, va.escape_end, tau1).unwrap_or(f64::NAN);
        let mut gb = overshoot(iv, vb.reached_tau, vb.escape_end, tau1).unwrap_or(f64::NAN);
        let mut usable = true;
        for _ in 0..60 {
            if ga.is_finite() && gb.is_finite() {
                break;
            }
            let mid = 0.5 * (ka + kb);
            let g = match solve(mid, &mut guess) {
                Ok(s) => overshoot(iv, s.reached_tau, s.escape_end, tau1),
                Err(_) => None,
            };
            let Some(g) = g else {
                usable = false;
                break;
            };
            if g == 0.0 {
                (ka, kb, ga, gb) = (mid, mid, g, g);
                break;
            }
            if (g < 0.0) == (ga < 0.0) {
                (ka, ga) = (mid, g);
            } else {
                (kb, gb) = (mid, g);
            }
        }
        if !(usable && ga.is_finite() && gb.is_finite()) {
            continue;
        }
        let found = brent(
            |k| {
                let s = solve(k, &mut guess)?;
                s.reached_tau
                    .map(|r| r - tau1)
                    .ok_or_else(|| ConnectError::Numerical("fake node inside a bracket".into()))
            },
            ka,
            kb,
            1e-16,
            200,
        );
        let Ok(k) = found else { continue };
        let Ok(s) = solve(k, &mut guess) else { continue };
        if matches!(s.reached_tau, Some(r) if (r - tau1).abs() <= REACH_TOL) {
            hits.push(Hit { sample: s });
        }
    }
    hits.sort_by(|a, b| {
        a.sample
            .k
            .abs()
            .total_cmp(&b.sample.k.abs())
            .then_with(|| lex(&a.sample.y, &b.sample.y))
    });
    hits
}

/// `reached − τ₁`, or an infinity of the side a fake path escapes to.
fn overshoot(iv: &crate::model::Interval, reached: Option<f64>, escape: Option<End>, tau1: f64) -> Option<f64> {
    match (reached, escape) {
        (Some(r), _) => Some(r - tau1),
        (None, Some(end)) => Some(if iv.endpoint(end) > tau1 { f64::INFINITY } else { f64::NEG_INFINITY }),
        (None, None) => None,
    }
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}
