//! Dormand–Prince 5(4) with step-size control and event location.

use super::{Event, EventKind, Sample, StopSpec, Trajectory, ESCAPE_EDGE};
use crate::model::{ModelError, NormalizationMap, SpacetimeModel, MAX_FACTORS};

const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-12;
/// Bisection steps when locating an event inside an accepted step.
const LOCATE_ITERS: usize = 60;

type State = [f64; 2 + MAX_FACTORS];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub(super) struct GeodesicSystem<'m> {
    model: &'m SpacetimeModel,
    c: [f64; MAX_FACTORS],
    sqrt_c: [f64; MAX_FACTORS],
    d: f64,
    n: usize,
}

impl<'m> GeodesicSystem<'m> {
    pub fn new(model: &'m SpacetimeModel, c: &[f64], d: f64) -> Self {
        let n = model.n();
        let mut cv = [0.0; MAX_FACTORS];
        let mut sc = [0.0; MAX_FACTORS];
        for i in 0..n {
            cv[i] = c[i];
            sc[i] = c[i].sqrt();
        }
        GeodesicSystem {
            model,
            c: cv,
            sqrt_c: sc,
            d,
            n,
        }
    }

    pub fn potential(&self, tau: f64) -> Result<f64, ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut dv = [0.0; MAX_FACTORS];
        self.model.eval_into(tau, &mut v, &mut dv)?;
        Ok((0..self.n).map(|i| self.c[i] / (v[i] * v[i])).sum())
    }

    fn rhs(&self, y: &State, out: &mut State) -> Result<(), ModelError> {
        let mut v = [0.0; MAX_FACTORS];
        let mut dv = [0.0; MAX_FACTORS];
        self.model.eval_into(y[0], &mut v, &mut dv)?;
        out[0] = y[1];
        let mut acc = 0.0;
        for i in 0..self.n {
            let w = 1.0 / (v[i] * v[i]);
            acc -= self.c[i] * dv[i] * w / v[i];
            out[2 + i] = self.sqrt_c[i] * w;
        }
        out[1] = acc;
        Ok(())
    }

    fn dim(&self) -> usize {
        2 + self.n
    }

    /// One step of size `h`; returns the 5th-order state and the scaled error.
    fn step(&self, y: &State, k1: &State, h: f64) -> Result<(State, State, f64), ModelError> {
        let m = self.dim();
        let mut k = [[0.0; 2 + MAX_FACTORS]; 7];
        k[0] = *k1;
        for s in 1..7 {
            let mut ys = *y;
            for j in 0..m {
                ys[j] += h * (0..s).map(|p| A[s][p] * k[p][j]).sum::<f64>();
            }
            let mut ks = [0.0; 2 + MAX_FACTORS];
            self.rhs(&ys, &mut ks)?;
            k[s] = ks;
        }
        let mut y5 = *y;
        let mut err = 0.0f64;
        for j in 0..m {
            let (mut s5, mut s4) = (0.0, 0.0);
            for s in 0..7 {
                s5 += B5[s] * k[s][j];
                s4 += B4[s] * k[s][j];
            }
            y5[j] += h * s5;
            let scale = ATOL + RTOL * y[j].abs().max(y5[j].abs());
            err = err.max((h * (s5 - s4)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(ModelError::Config("non-finite step".into()));
        }
        Ok((y5, k[6], err))
    }

    fn sample(&self, t: f64, y: &State) -> Sample {
        Sample {
            t,
            tau: y[0],
            dtau: y[1],
            r: y[2..2 + self.n].to_vec(),
        }
    }

    fn drift(&self, y: &State) -> f64 {
        match self.potential(y[0]) {
            Ok(f) => (y[1] * y[1] - (f - self.d)).abs(),
            Err(_) => 0.0,
        }
    }
}

/// Signed event functions; an event fires where one changes sign.
struct Watch<'a> {
    stop: &'a StopSpec,
    phi: &'a NormalizationMap,
    /// Last nonzero sign of τ'.
    heading: f64,
    fiber_done: Vec<bool>,
}

impl Watch<'_> {
    fn values(&self, y: &State) -> Vec<(EventKind, f64)> {
        let mut out = Vec::new();
        if self.heading != 0.0 {
            out.push((EventKind::Turning, y[1] * self.heading));
        }
        if let Some(target) = self.stop.tau_target {
            out.push((EventKind::ReachedTauTarget, y[0] - target));
        }
        for (i, t) in self.stop.fiber_targets.iter().enumerate() {
            if let (Some(l), false) = (t, self.fiber_done[i]) {
                out.push((EventKind::FiberTarget(i), l - y[2 + i]));
            }
        }
        out.push((EventKind::LeftInterval, 1.0 - ESCAPE_EDGE - self.phi.forward(y[0]).abs()));
        out
    }
}

pub(super) fn run(sys: &GeodesicSystem<'_>, phi: &NormalizationMap, y0: State, stop: &StopSpec) -> Trajectory {
    let mut watch = Watch {
        stop,
        phi,
        heading: y0[1].signum() * (y0[1] != 0.0) as u8 as f64,
        fiber_done: vec![false; stop.fiber_targets.len()],
    };
    let mut traj = Trajectory {
        samples: vec![sys.sample(0.0, &y0)],
        events: Vec::new(),
        first_integral_drift: sys.drift(&y0),
    };
    // Targets that are already met at the start.
    for (i, t) in stop.fiber_targets.iter().enumerate() {
        if matches!(t, Some(l) if *l <= 0.0) {
            watch.fiber_done[i] = true;
            traj.events.push(Event {
                kind: EventKind::FiberTarget(i),
                state: sys.sample(0.0, &y0),
            });
        }
    }
    if finished(stop, &watch, &traj) {
        return traj;
    }
    let (mut t, mut y) = (0.0, y0);
    let mut k1 = [0.0; 2 + MAX_FACTORS];
    if sys.rhs(&y, &mut k1).is_err() {
        traj.events.push(Event {
            kind: EventKind::LeftInterval,
            state: sys.sample(t, &y),
        });
        return traj;
    }
    let mut h = 1e-2 * (1.0 + y[0].abs()).min(10.0);
    for _ in 0..stop.max_steps {
        if t >= stop.t_max {
            push_end(&mut traj, sys, EventKind::Budget, t, &y);
            return traj;
        }
        h = h.min(stop.t_max - t);
        if h < 1e-14 * t.abs().max(1.0) {
            push_end(&mut traj, sys, EventKind::Diverged, t, &y);
            return traj;
        }
        let (y_new, k_last, err) = match sys.step(&y, &k1, h) {
            Ok(r) => r,
            Err(_) => {
                h *= 0.25;
                continue;
            }
        };
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        // Events inside (t, t + h], in time order.
        let before = watch.values(&y);
        let after = watch.values(&y_new);
        let mut hits: Vec<(f64, EventKind, State)> = Vec::new();
        for ((kind, g0), (_, g1)) in before.iter().zip(&after) {
            let crosses = match kind {
                EventKind::ReachedTauTarget => *g0 != 0.0 && g0 * g1 <= 0.0,
                _ => *g0 > 0.0 && *g1 <= 0.0,
            };
            if crosses {
                let (dt, state) = locate(sys, &watch, *kind, &y, &k1, h, *g0);
                hits.push((t + dt, *kind, state));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (te, kind, ye) in hits {
            match kind {
                EventKind::Turning => watch.heading = -watch.heading,
                EventKind::FiberTarget(i) => watch.fiber_done[i] = true,
                _ => {}
            }
            traj.events.push(Event {
                kind,
                state: sys.sample(te, &ye),
            });
            if kind == EventKind::LeftInterval || finished(stop, &watch, &traj) {
                if stop.record_samples || traj.samples.len() == 1 {
                    traj.samples.push(sys.sample(te, &ye));
                }
                traj.first_integral_drift = traj.first_integral_drift.max(sys.drift(&ye));
                return traj;
            }
        }
        t += h;
        y = y_new;
        k1 = k_last;
        if watch.heading == 0.0 && y[1] != 0.0 {
            watch.heading = y[1].signum();
        }
        traj.first_integral_drift = traj.first_integral_drift.max(sys.drift(&y));
        if stop.record_samples {
            traj.samples.push(sys.sample(t, &y));
        }
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= grow;
    }
    push_end(&mut traj, sys, EventKind::Budget, t, &y);
    traj
}

fn push_end(traj: &mut Trajectory, sys: &GeodesicSystem<'_>, kind: EventKind, t: f64, y: &State) {
    traj.events.push(Event {
        kind,
        state: sys.sample(t, y),
    });
    if traj.samples.last().is_none_or(|s| s.t != t) {
        traj.samples.push(sys.sample(t, y));
    }
}

fn finished(stop: &StopSpec, watch: &Watch<'_>, traj: &Trajectory) -> bool {
    if stop.stop_at_fibers && !watch.fiber_done.is_empty() {
        let all = stop
            .fiber_targets
            .iter()
            .zip(&watch.fiber_done)
            .all(|(t, done)| t.is_none() || *done);
        if all {
            return true;
        }
    }
    if stop.stop_at_tau && traj.events.iter().any(|e| e.kind == EventKind::ReachedTauTarget) {
        return true;
    }
    matches!(stop.max_turnings, Some(m) if traj.count(EventKind::Turning) >= m)
}

/// Bisects the sub-step size at which the event function of `kind` changes
/// sign, re-stepping from the start of the accepted step each time.
fn locate(
    sys: &GeodesicSystem<'_>,
    watch: &Watch<'_>,
    kind: EventKind,
    y: &State,
    k1: &State,
    h: f64,
    g0: f64,
) -> (f64, State) {
    let value = |state: &State| {
        watch
            .values(state)
            .into_iter()
            .find(|(k, _)| *k == kind)
            .map_or(0.0, |(_, g)| g)
    };
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..LOCATE_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match sys.step(y, k1, mid) {
            Ok((ym, _, _)) if value(&ym).signum() == g0.signum() && value(&ym) != 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    let state = sys.step(y, k1, hi).map(|r| r.0).unwrap_or(*y);
    (hi, state)
}
