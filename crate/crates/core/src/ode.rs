//! Adaptive Dormand-Prince 5(4) integrator with event location.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    /// Renormalize sphere-chart states after every accepted step.
    pub project_constraints: bool,
    /// Allowed per-step constraint drift; ten times this is a hard error.
    pub constraint_tol: f64,
    pub event_tol: f64,
    /// Plane-chart integration stops this close to a primary.
    pub collision_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step: 0.05,
            min_step: 1e-13,
            initial_step: 1e-4,
            max_steps: 2_000_000,
            project_constraints: true,
            constraint_tol: 1e-10,
            event_tol: 1e-12,
            collision_radius: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.abs_tol, self.rel_tol, self.max_step, self.min_step, self.event_tol, self.constraint_tol];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && self.min_step < self.max_step {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("integrator tolerances must be positive: {self:?}")))
        }
    }
}

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Number of leading components used in the error norm.
    fn error_dim(&self) -> usize {
        self.dim()
    }

    /// Pulls an accepted state back onto its constraint set; returns the drift removed.
    fn project(&self, _y: &mut [f64]) -> f64 {
        0.0
    }

    /// Distance to a singularity, if the system has one.
    fn singular_distance(&self, _y: &[f64]) -> Option<f64> {
        None
    }
}

/// Scalar event function; a zero crossing after `t_min` stops the integration.
pub struct Event<'a> {
    pub g: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    pub t_min: f64,
    /// 0 for any crossing, +1 for upward, -1 for downward.
    pub direction: i8,
    /// Stop at this crossing (1 = first); earlier ones are recorded.
    pub occurrence: usize,
}

impl<'a> Event<'a> {
    pub fn new(g: impl Fn(&[f64]) -> f64 + 'a, t_min: f64) -> Self {
        Self { g: Box::new(g), t_min, direction: 0, occurrence: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Reached,
    Event,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub termination: Termination,
    /// Smallest `|g|` seen after `t_min` (for timeouts).
    pub closest_event_value: Option<(f64, f64)>,
    pub max_projection: f64,
    /// Located crossings before the terminal one.
    pub crossings: Vec<(f64, Vec<f64>)>,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.t.last().unwrap(), self.y.last().unwrap())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Scratch {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }
}

/// One Dormand-Prince step from `(t, y)` with size `h`; returns `(y_new, error estimate vector)`.
fn dp_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64, s: &mut Scratch) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    sys.rhs(t, y, &mut s.k[0])?;
    let stages: [(f64, &[f64]); 5] =
        [(C2, &[A21]), (C3, &[A31, A32]), (C4, &[A41, A42, A43]), (C5, &[A51, A52, A53, A54]), (1.0, &[A61, A62, A63, A64, A65])];
    for (stage, (c, a)) in stages.iter().enumerate() {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, aj) in a.iter().enumerate() {
                acc += aj * s.k[j][i];
            }
            s.tmp[i] = y[i] + h * acc;
        }
        let (_, rest) = s.k.split_at_mut(stage + 1);
        sys.rhs(t + c * h, &s.tmp, &mut rest[0])?;
    }
    let mut y_new = vec![0.0; n];
    for i in 0..n {
        y_new[i] = y[i] + h * (B1 * s.k[0][i] + B3 * s.k[2][i] + B4 * s.k[3][i] + B5 * s.k[4][i] + B6 * s.k[5][i]);
    }
    sys.rhs(t + h, &y_new, &mut s.k[6])?;
    let mut err = vec![0.0; n];
    for i in 0..n {
        err[i] = h * (E1 * s.k[0][i] + E3 * s.k[2][i] + E4 * s.k[3][i] + E5 * s.k[4][i] + E6 * s.k[5][i] + E7 * s.k[6][i]);
    }
    Ok((y_new, err))
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], m: usize, cfg: &IntegratorConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..m {
        let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / m as f64).sqrt()
}

/// Integrates from `t0` to `t_end` (which may be smaller than `t0`), optionally stopping at an event.
pub fn solve<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    event: Option<&Event>,
) -> Result<Solution> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidParameter(format!("state has {} components, expected {n}", y0.len())));
    }
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let m = sys.error_dim();
    let mut s = Scratch::new(n);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut ts = vec![t];
    let mut ys = vec![y.clone()];
    let mut h = cfg.initial_step.min(cfg.max_step).min((t_end - t0).abs().max(cfg.min_step));
    let mut g_prev = event.map(|e| (e.g)(&y));
    let mut closest: Option<(f64, f64)> = None;
    let mut max_projection: f64 = 0.0;
    let mut crossings = Vec::new();

    for _ in 0..cfg.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok(Solution {
                t: ts,
                y: ys,
                termination: Termination::Reached,
                closest_event_value: closest,
                max_projection,
                crossings,
            });
        }
        let h_try = h.min((t_end - t).abs());
        let (mut y_new, err) = dp_step(sys, t, &y, dir * h_try, &mut s)?;
        let e = error_norm(&y, &y_new, &err, m, cfg);
        if !e.is_finite() || e > 1.0 {
            let factor = if e.is_finite() { (0.9 * e.powf(-0.2)).max(0.2) } else { 0.2 };
            h = h_try * factor;
            if h < cfg.min_step {
                let distance = sys.singular_distance(&y).unwrap_or(f64::NAN);
                return Err(Error::StepUnderflow { t, distance });
            }
            continue;
        }
        let drift = if cfg.project_constraints { sys.project(&mut y_new) } else { 0.0 };
        if drift > 10.0 * cfg.constraint_tol {
            return Err(Error::ConstraintDrift { t: t + dir * h_try, drift, limit: 10.0 * cfg.constraint_tol });
        }
        max_projection = max_projection.max(drift);
        let t_new = t + dir * h_try;
        if let Some(d) = sys.singular_distance(&y_new) {
            if d < cfg.collision_radius {
                return Err(Error::NearCollision { t: t_new, distance: d });
            }
        }

        if let (Some(ev), Some(gp)) = (event, g_prev) {
            let g_new = (ev.g)(&y_new);
            let past_min = (t_new - ev.t_min) * dir > 0.0;
            if past_min {
                let a = g_new.abs();
                if closest.is_none_or(|(_, v)| a < v) {
                    closest = Some((t_new, a));
                }
            }
            let crossed = gp != 0.0 && g_new.signum() != gp.signum() || g_new == 0.0 && gp != 0.0;
            let right_way = match ev.direction {
                0 => true,
                d => (g_new - gp).signum() == d as f64,
            };
            if past_min && crossed && right_way {
                let (t_ev, y_ev) = locate(sys, t, &y, dir * h_try, ev, cfg, &mut s)?;
                if crossings.len() + 1 < ev.occurrence.max(1) {
                    crossings.push((t_ev, y_ev));
                    g_prev = Some(g_new);
                    t = t_new;
                    y = y_new;
                    ts.push(t);
                    ys.push(y.clone());
                    let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h = (h_try * factor).min(cfg.max_step);
                    continue;
                }
                ts.push(t_ev);
                ys.push(y_ev);
                return Ok(Solution {
                    t: ts,
                    y: ys,
                    termination: Termination::Event,
                    closest_event_value: closest,
                    max_projection,
                    crossings,
                });
            }
            g_prev = Some(g_new);
        }

        t = t_new;
        y = y_new;
        ts.push(t);
        ys.push(y.clone());
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_try * factor).min(cfg.max_step);
    }
    Err(Error::Numerical(format!("step budget of {} exhausted at t = {t}", cfg.max_steps)))
}

/// Bisection on the step fraction; each trial state comes from a single step from the step start.
fn locate<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    ev: &Event,
    cfg: &IntegratorConfig,
    s: &mut Scratch,
) -> Result<(f64, Vec<f64>)> {
    let g0 = (ev.g)(y);
    let sign = h.signum();
    let state_at = |tau: f64, s: &mut Scratch| -> Result<Vec<f64>> {
        let (mut v, _) = dp_step(sys, t, y, sign * tau, s)?;
        if cfg.project_constraints {
            sys.project(&mut v);
        }
        Ok(v)
    };
    let (mut lo, mut hi) = (0.0, h.abs());
    while hi - lo > cfg.event_tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let ym = state_at(mid, s)?;
        let gm = (ev.g)(&ym);
        if gm == 0.0 {
            return Ok((t + sign * mid, ym));
        }
        if gm.signum() == g0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((t + sign * hi, state_at(hi, s)?))
}
