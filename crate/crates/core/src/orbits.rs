//! Symmetric periodic orbits: shooting from the fixed-locus circles, type
//! classification, doubling and iteration, and the rotating Kepler oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PlanePhasePoint, ProblemKind};
use crate::error::{Error, Primary, Result};
use crate::flow::SphereSystem;
use crate::moser::{self, RegularizedSurface, SpherePhasePoint};
use crate::ode::{self, Event, IntegratorConfig, Termination};
use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Circle {
    Plus,
    Minus,
}

impl Circle {
    pub fn sign(self) -> i8 {
        match self {
            Circle::Plus => 1,
            Circle::Minus => -1,
        }
    }

    pub fn of_sign(v: f64) -> Self {
        if v >= 0.0 {
            Circle::Plus
        } else {
            Circle::Minus
        }
    }
}

impl std::fmt::Display for Circle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Circle::Plus => "L+",
            Circle::Minus => "L-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitType {
    I,
    II,
}

impl std::fmt::Display for OrbitType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrbitType::I => "I",
            OrbitType::II => "II",
        })
    }
}

/// Residual `-xi2 eta0 + xi0 eta2` on the section `xi1 = 0`. There the
/// constraint `xi . eta = 0` forces `(eta0, eta2)` onto the line spanned by
/// `(-xi2, xi0)`, so this single number decides membership in the fixed locus.
pub fn section_residual(w: &SpherePhasePoint) -> f64 {
    -w.xi[2] * w.eta[0] + w.xi[0] * w.eta[2]
}

/// Fiber angle of a point with `xi1 = 0`.
pub fn fiber_angle(w: &SpherePhasePoint) -> f64 {
    w.xi[2].atan2(w.xi[0]).rem_euclid(std::f64::consts::TAU)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub integrator: IntegratorConfig,
    /// Which crossing of the section is used (1 = first).
    pub crossing: usize,
    /// Give up after this much regularized time.
    pub s_max: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self { integrator: IntegratorConfig::default(), crossing: 1, s_max: 60.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Shot {
    pub theta0: f64,
    pub start: Circle,
    /// Residuals at the first `crossing` crossings, in order.
    pub residuals: Vec<f64>,
    pub s: Vec<f64>,
    pub t_phys: Vec<f64>,
    pub ends: Vec<SpherePhasePoint>,
}

impl Shot {
    pub fn residual(&self, n: usize) -> Option<f64> {
        self.residuals.get(n - 1).copied()
    }

    pub fn landing(&self, n: usize) -> Option<Circle> {
        self.ends.get(n - 1).map(|w| Circle::of_sign(w.eta[1]))
    }
}

fn to_point(y: &[f64]) -> SpherePhasePoint {
    SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]])
}

/// Integrates from the fixed-locus point and records up to `cfg.crossing` section crossings.
/// Fewer entries than requested means the orbit did not return in time.
pub fn shoot(surface: &RegularizedSurface, start: Circle, theta0: f64, cfg: &ShootingConfig) -> Result<Shot> {
    let w0 = surface.fixed_locus_point(theta0, start.sign())?;
    let (shot, _) = shoot_from(surface, w0, cfg.crossing, cfg, false)?;
    Ok(Shot { theta0, start, ..shot })
}

fn shoot_from(
    surface: &RegularizedSurface,
    w0: SpherePhasePoint,
    crossings: usize,
    cfg: &ShootingConfig,
    keep_samples: bool,
) -> Result<(Shot, Vec<OrbitSample>)> {
    let sys = SphereSystem { surface, variational: false };
    let ev = Event { occurrence: crossings.max(1), ..Event::new(|y: &[f64]| y[1], 0.0) };
    let mut y0: Vec<f64> = w0.xi.iter().chain(w0.eta.iter()).copied().collect();
    y0.push(0.0);
    let sol = ode::solve(&sys, 0.0, &y0, cfg.s_max, &cfg.integrator, Some(&ev))?;
    let mut hits: Vec<(f64, Vec<f64>)> = sol.crossings.clone();
    if sol.termination == Termination::Event {
        let (s, y) = sol.last();
        hits.push((s, y.to_vec()));
    }
    let mut shot =
        Shot { theta0: fiber_angle(&w0), start: Circle::of_sign(w0.eta[1]), residuals: vec![], s: vec![], t_phys: vec![], ends: vec![] };
    for (s, y) in hits {
        let w = to_point(&y);
        shot.residuals.push(section_residual(&w));
        shot.s.push(s);
        shot.t_phys.push(y[6]);
        shot.ends.push(w);
    }
    let samples = if keep_samples {
        sol.t.iter().zip(&sol.y).map(|(s, y)| OrbitSample { s: *s, t_phys: y[6], point: to_point(y) }).collect()
    } else {
        vec![]
    };
    Ok((shot, samples))
}

/// Residual at the configured crossing; `None` when the orbit does not return.
pub fn shooting_residual(surface: &RegularizedSurface, start: Circle, theta0: f64, cfg: &ShootingConfig) -> Result<Option<(f64, Shot)>> {
    let shot = shoot(surface, start, theta0, cfg)?;
    Ok(shot.residual(cfg.crossing).map(|r| (r, shot)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSample {
    /// Regularized time.
    pub s: f64,
    pub t_phys: f64,
    pub point: SpherePhasePoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetricOrbit {
    pub kind: ProblemKind,
    pub primary: Primary,
    pub c: f64,
    pub start_circle: Circle,
    pub end_circle: Circle,
    pub theta0: f64,
    pub theta1: f64,
    /// Section crossing at which the chord closes.
    pub crossing: usize,
    /// Half period in regularized time.
    pub half_period: f64,
    pub half_period_physical: f64,
    pub residual: f64,
    /// `d residual / d theta0` at the root; zero signals a degenerate return.
    pub nondegeneracy: f64,
    pub orbit_type: OrbitType,
    /// Plane-projection criterion, absent when an endpoint is the collision point.
    pub plane_type: Option<OrbitType>,
    pub samples: Vec<OrbitSample>,
}

const POLE_TOL: f64 = 1e-6;

impl SymmetricOrbit {
    pub fn start(&self) -> SpherePhasePoint {
        self.samples[0].point
    }

    pub fn end(&self) -> SpherePhasePoint {
        self.samples.last().unwrap().point
    }

    /// Both classification criteria agree (trivially true when the plane one is skipped).
    pub fn criteria_agree(&self) -> bool {
        self.plane_type.is_none_or(|t| t == self.orbit_type)
    }

    /// The doubled orbit `x_R # x` of period `2T`.
    pub fn doubled(&self) -> ClosedCurve {
        self.iterate(2)
    }

    /// `m` half-chords alternating `x` and its reflection `x_R(t) = R x(T - t)`.
    pub fn iterate(&self, m: usize) -> ClosedCurve {
        let ts = self.half_period;
        let tp = self.half_period_physical;
        let mut out: Vec<OrbitSample> = Vec::with_capacity(m * self.samples.len());
        for j in 0..m {
            let (s0, t0) = (j as f64 * ts, j as f64 * tp);
            let piece: Vec<OrbitSample> = if j % 2 == 0 {
                self.samples.iter().map(|p| OrbitSample { s: s0 + p.s, t_phys: t0 + p.t_phys, point: p.point }).collect()
            } else {
                self.samples
                    .iter()
                    .rev()
                    .map(|p| OrbitSample { s: s0 + ts - p.s, t_phys: t0 + tp - p.t_phys, point: moser::regularized_involution(&p.point) })
                    .collect()
            };
            // drop the duplicated junction point
            let skip = usize::from(j > 0);
            out.extend(piece.into_iter().skip(skip));
        }
        let gap = distance6(&out[0].point, &out.last().unwrap().point);
        ClosedCurve { samples: out, period: m as f64 * ts, period_physical: m as f64 * tp, closing_gap: gap }
    }

    pub fn plane_samples(&self) -> Vec<Option<PlanePhasePoint>> {
        self.samples.iter().map(|p| moser::moser_map(&p.point, &self.kind, self.primary).ok()).collect()
    }
}

pub(crate) fn distance6(a: &SpherePhasePoint, b: &SpherePhasePoint) -> f64 {
    (0..3).map(|i| (a.xi[i] - b.xi[i]).powi(2) + (a.eta[i] - b.eta[i]).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedCurve {
    pub samples: Vec<OrbitSample>,
    pub period: f64,
    pub period_physical: f64,
    /// Distance between the first and last sample; zero up to rounding for even iterates.
    pub closing_gap: f64,
}

/// Type of an orbit from its endpoint circles.
pub fn classify_circles(start: Circle, end: Circle) -> OrbitType {
    if start != end {
        OrbitType::I
    } else {
        OrbitType::II
    }
}

/// Type from the signs of `q1 - q1^P` at both ends; `None` if an endpoint sits at the pole.
pub fn classify_plane(surface: &RegularizedSurface, start: &SpherePhasePoint, end: &SpherePhasePoint) -> Option<OrbitType> {
    if 1.0 - start.xi[0] < POLE_TOL || 1.0 - end.xi[0] < POLE_TOL {
        return None;
    }
    let qp = surface.primary_position()[0];
    let a = moser::moser_map(start, &surface.kind, surface.primary).ok()?.q1 - qp;
    let b = moser::moser_map(end, &surface.kind, surface.primary).ok()?.q1 - qp;
    Some(if a * b < 0.0 { OrbitType::I } else { OrbitType::II })
}

pub fn classify(orbit: &SymmetricOrbit) -> OrbitType {
    classify_circles(orbit.start_circle, orbit.end_circle)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub samples_per_circle: usize,
    pub crossings: Vec<usize>,
    pub shooting: ShootingConfig,
    /// Accept a refined root only if its residual is below this.
    pub residual_tol: f64,
    pub theta_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            samples_per_circle: 720,
            crossings: vec![1, 2, 3],
            shooting: ShootingConfig::default(),
            residual_tol: 1e-8,
            theta_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub orbits: Vec<SymmetricOrbit>,
    pub evaluated: usize,
    pub timeouts: usize,
    pub brackets: usize,
    /// Brackets whose refined residual stayed large (jumps of the crossing index).
    pub rejected: usize,
    /// Roots that repeat an orbit already closing at an earlier crossing.
    pub iterates: usize,
}

/// Refines a root of the residual at crossing `n` starting from the circle `start`.
pub fn refine_orbit(surface: &RegularizedSurface, start: Circle, lo: f64, hi: f64, n: usize, scan: &ScanConfig) -> Result<SymmetricOrbit> {
    let cfg = ShootingConfig { crossing: n, ..scan.shooting };
    let f = |th: f64| match shooting_residual(surface, start, th, &cfg) {
        Ok(Some((r, _))) => r,
        _ => f64::NAN,
    };
    let theta = roots::brent(f, lo, hi, scan.theta_tol, 200)?;
    build_orbit(surface, start, theta, n, scan)
}

/// Integrates the chord from `theta` and assembles the orbit record.
pub fn build_orbit(surface: &RegularizedSurface, start: Circle, theta: f64, n: usize, scan: &ScanConfig) -> Result<SymmetricOrbit> {
    let cfg = ShootingConfig { crossing: n, ..scan.shooting };
    let w0 = surface.fixed_locus_point(theta, start.sign())?;
    let (shot, samples) = shoot_from(surface, w0, n, &cfg, true)?;
    let Some(residual) = shot.residual(n) else {
        return Err(Error::Numerical(format!("no return at theta = {theta}")));
    };
    let h = 1e-6;
    let rp = shooting_residual(surface, start, theta + h, &cfg)?.map(|v| v.0);
    let rm = shooting_residual(surface, start, theta - h, &cfg)?.map(|v| v.0);
    let nondegeneracy = match (rp, rm) {
        (Some(a), Some(b)) => (a - b) / (2.0 * h),
        _ => 0.0,
    };
    let end = shot.ends[n - 1];
    let end_circle = Circle::of_sign(end.eta[1]);
    let start_pt = samples[0].point;
    Ok(SymmetricOrbit {
        kind: surface.kind,
        primary: surface.primary,
        c: surface.c,
        start_circle: start,
        end_circle,
        theta0: theta.rem_euclid(std::f64::consts::TAU),
        theta1: fiber_angle(&end),
        crossing: n,
        half_period: shot.s[n - 1],
        half_period_physical: shot.t_phys[n - 1],
        residual,
        nondegeneracy,
        orbit_type: classify_circles(start, end_circle),
        plane_type: classify_plane(surface, &start_pt, &end),
        samples,
    })
}

fn angle_close(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d < tol || std::f64::consts::TAU - d < tol
}

/// Same orbit up to time shift and reflection: identical endpoint pairs.
pub fn same_orbit(a: &SymmetricOrbit, b: &SymmetricOrbit, tol: f64) -> bool {
    let ends = |o: &SymmetricOrbit| [(o.start_circle, o.theta0), (o.end_circle, o.theta1)];
    let (ea, eb) = (ends(a), ends(b));
    let matches = |x: (Circle, f64), y: (Circle, f64)| x.0 == y.0 && angle_close(x.1, y.1, tol);
    let same_ends = (matches(ea[0], eb[0]) && matches(ea[1], eb[1])) || (matches(ea[0], eb[1]) && matches(ea[1], eb[0]));
    same_ends && (a.half_period - b.half_period).abs() < tol.sqrt() * (1.0 + a.half_period)
}

pub fn find_symmetric_orbits(surface: &RegularizedSurface, scan: &ScanConfig) -> Result<ScanReport> {
    if scan.samples_per_circle < 2 || scan.crossings.is_empty() {
        return Err(Error::InvalidParameter("scan needs at least two samples and one crossing count".into()));
    }
    let n_max = *scan.crossings.iter().max().unwrap();
    let cfg = ShootingConfig { crossing: n_max, ..scan.shooting };
    let mut report = ScanReport { orbits: vec![], evaluated: 0, timeouts: 0, brackets: 0, rejected: 0, iterates: 0 };
    let n = scan.samples_per_circle;
    for start in [Circle::Plus, Circle::Minus] {
        let thetas: Vec<f64> = (0..=n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect();
        let shots: Vec<Option<Shot>> = thetas.par_iter().map(|&th| shoot(surface, start, th, &cfg).ok()).collect();
        report.evaluated += n;
        report.timeouts += shots[..n].iter().filter(|s| s.as_ref().is_none_or(|s| s.residuals.len() < n_max)).count();
        for &m in &scan.crossings {
            for k in 0..n {
                let (Some(a), Some(b)) = (&shots[k], &shots[k + 1]) else {
                    continue;
                };
                let (Some(ra), Some(rb)) = (a.residual(m), b.residual(m)) else {
                    continue;
                };
                if ra.signum() == rb.signum() && ra != 0.0 {
                    continue;
                }
                report.brackets += 1;
                let Ok(orbit) = refine_orbit(surface, start, thetas[k], thetas[k + 1], m, scan) else {
                    report.rejected += 1;
                    continue;
                };
                if orbit.residual.abs() > scan.residual_tol {
                    report.rejected += 1;
                    continue;
                }
                // an orbit closing at an earlier crossing is an iterate of a shorter chord
                let shot = shoot(surface, start, orbit.theta0, &ShootingConfig { crossing: m, ..scan.shooting })?;
                if shot.residuals[..m - 1].iter().any(|r| r.abs() < 1e-6) {
                    report.iterates += 1;
                    continue;
                }
                if !report.orbits.iter().any(|o| same_orbit(o, &orbit, 1e-6)) {
                    report.orbits.push(orbit);
                }
            }
        }
    }
    report.orbits.sort_by(|a, b| a.half_period.total_cmp(&b.half_period));
    Ok(report)
}

/// Crossings of the doubled orbit with `Fix R'` detected on the section `xi2 = 0`;
/// returns the smallest residual `-xi1 eta0 + xi0 eta1` found there.
pub fn prime_fixed_locus_defect(surface: &RegularizedSurface, orbit: &SymmetricOrbit, cfg: &IntegratorConfig) -> Result<Option<f64>> {
    if !matches!(surface.kind, ProblemKind::HillLunar) {
        return Err(Error::UnsupportedInvolution("R'"));
    }
    let sys = SphereSystem { surface, variational: false };
    let ev = Event { occurrence: usize::MAX, ..Event::new(|y: &[f64]| y[2], 0.0) };
    let w0 = orbit.start();
    let mut y0: Vec<f64> = w0.xi.iter().chain(w0.eta.iter()).copied().collect();
    y0.push(0.0);
    let sol = ode::solve(&sys, 0.0, &y0, 2.0 * orbit.half_period, cfg, Some(&ev))?;
    let mut pts: Vec<SpherePhasePoint> = sol.crossings.iter().map(|(_, y)| to_point(y)).collect();
    if w0.xi[2].abs() < 1e-14 {
        pts.push(w0);
    }
    Ok(pts.iter().map(|w| (-w.xi[1] * w.eta[0] + w.xi[0] * w.eta[1]).abs()).reduce(f64::min))
}

/// Whether a symmetric orbit of Hill's problem is also symmetric under `R'`.
pub fn doubly_symmetric_detect(surface: &RegularizedSurface, orbit: &SymmetricOrbit, tol: f64) -> Result<bool> {
    let cfg = IntegratorConfig::default();
    Ok(prime_fixed_locus_defect(surface, orbit, &cfg)?.is_some_and(|d| d <= tol))
}

/// Largest distance from a mapped sample to the polygon through the samples.
pub fn trace_invariance_distance(samples: &[Vec<f64>], map: impl Fn(&[f64]) -> Vec<f64> + Sync) -> f64 {
    let seg_dist = |p: &[f64], a: &[f64], b: &[f64]| {
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
        let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
        let l2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if l2 > 0.0 { (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / l2).clamp(0.0, 1.0) } else { 0.0 };
        ap.iter().zip(&ab).map(|(u, v)| (u - t * v).powi(2)).sum::<f64>().sqrt()
    };
    samples
        .par_iter()
        .map(|s| {
            let img = map(s);
            samples.windows(2).map(|w| seg_dist(&img, &w[0], &w[1])).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Direct,
    Retrograde,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Direct => 1.0,
            Orientation::Retrograde => -1.0,
        }
    }
}

/// A `k`-fold covered Kepler ellipse in an `l`-fold covered rotating frame at energy `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerOrbitSpec {
    pub k: u32,
    pub l: u32,
    pub orientation: Orientation,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeplerOrbit {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub angular_momentum: f64,
    /// Physical half period: the first return to the `q1`-axis at right angle.
    pub half_period: f64,
    pub samples: Vec<(f64, PlanePhasePoint)>,
    /// From the signs of `q1` at both ends.
    pub geometric_type: OrbitType,
    /// Type asserted by the parity rule: II when `k + l` is odd.
    pub parity_type: Option<OrbitType>,
}

impl KeplerOrbit {
    pub fn start(&self) -> PlanePhasePoint {
        self.samples[0].1
    }

    pub fn end(&self) -> PlanePhasePoint {
        self.samples.last().unwrap().1
    }
}

/// Rotating-frame state at time `t` of the Kepler ellipse with pericenter on the
/// positive axis at `t = 0`.
pub fn kepler_state(a: f64, e: f64, orientation: Orientation, t: f64) -> Result<PlanePhasePoint> {
    let n = a.powf(-1.5);
    let m = n * t;
    // Kepler's equation by Newton from a safe start
    let mut ea = if e < 0.8 { m } else { m - m.rem_euclid(std::f64::consts::TAU) + std::f64::consts::PI };
    for _ in 0..60 {
        let f = ea - e * ea.sin() - m;
        let step = f / (1.0 - e * ea.cos());
        ea -= step;
        if step.abs() < 1e-15 * (1.0 + ea.abs()) {
            break;
        }
    }
    if !ea.is_finite() {
        return Err(Error::Numerical(format!("Kepler equation failed at t = {t}")));
    }
    let s = orientation.sign();
    let b = a * (1.0 - e * e).sqrt();
    let ed = n / (1.0 - e * ea.cos());
    let (x, y) = (a * (ea.cos() - e), s * b * ea.sin());
    let (vx, vy) = (-a * ea.sin() * ed, s * b * ea.cos() * ed);
    // rotating axes: multiply by R(-t)
    let (c, sn) = (t.cos(), t.sin());
    Ok(PlanePhasePoint::new(c * x + sn * y, -sn * x + c * y, c * vx + sn * vy, -sn * vx + c * vy))
}

fn kepler_samples(a: f64, e: f64, orientation: Orientation, half: f64, n: usize) -> Result<Vec<(f64, PlanePhasePoint)>> {
    (0..=n)
        .map(|i| {
            let t = half * i as f64 / n as f64;
            Ok((t, kepler_state(a, e, orientation, t)?))
        })
        .collect()
}

fn geometric_type(samples: &[(f64, PlanePhasePoint)]) -> OrbitType {
    let a = samples[0].1.q1;
    let b = samples.last().unwrap().1.q1;
    if a * b < 0.0 {
        OrbitType::I
    } else {
        OrbitType::II
    }
}

/// Circular orbit at energy `c`: radius solves `-1/(2r) -+ sqrt(r) = c`.
pub fn kepler_circular(orientation: Orientation, c: f64, samples: usize) -> Result<KeplerOrbit> {
    let s = orientation.sign();
    let g = |r: f64| -0.5 / r - s * r.sqrt() - c;
    // direct: decreasing in 1/r near the primary; search the branch inside the unit circle
    let r = roots::brent(g, 1e-6, 1.0, 1e-15, 200)
        .map_err(|_| Error::InvalidParameter(format!("no circular {orientation:?} orbit inside r < 1 at c = {c}")))?;
    let omega = r.powf(-1.5) - s;
    let half = std::f64::consts::PI / omega.abs();
    let pts = kepler_samples(r, 0.0, orientation, half, samples.max(2))?;
    Ok(KeplerOrbit {
        semi_major_axis: r,
        eccentricity: 0.0,
        angular_momentum: s * r.sqrt(),
        half_period: half,
        geometric_type: geometric_type(&pts),
        parity_type: None,
        samples: pts,
    })
}

/// Analytic `(k, l)` orbit: mean motion `k / l`, closing after `k` ellipse and `l` frame periods.
pub fn kepler_oracle(spec: KeplerOrbitSpec, samples: usize) -> Result<KeplerOrbit> {
    if spec.k == 0 || spec.l == 0 {
        return Err(Error::InvalidParameter("k and l must be positive".into()));
    }
    let a = (spec.l as f64 / spec.k as f64).powf(2.0 / 3.0);
    let energy = -0.5 / a;
    let l_mom = energy - spec.c;
    let s = spec.orientation.sign();
    let (lo, hi) = match spec.orientation {
        Orientation::Direct => (energy - a.sqrt(), energy),
        Orientation::Retrograde => (energy, energy + a.sqrt()),
    };
    if !(l_mom * s > 0.0 && l_mom.abs() <= a.sqrt()) {
        return Err(Error::InvalidParameter(format!(
            "no ({}, {}) {:?} ellipse at c = {}; feasible energies lie in [{lo}, {hi}]",
            spec.k, spec.l, spec.orientation, spec.c
        )));
    }
    let e = (1.0 - l_mom * l_mom / a).max(0.0).sqrt();
    let half = std::f64::consts::PI * spec.l as f64;
    let pts = kepler_samples(a, e, spec.orientation, half, samples.max(2))?;
    let parity = if (spec.k + spec.l) % 2 == 1 { OrbitType::II } else { OrbitType::I };
    Ok(KeplerOrbit {
        semi_major_axis: a,
        eccentricity: e,
        angular_momentum: l_mom,
        half_period: half,
        geometric_type: geometric_type(&pts),
        parity_type: Some(parity),
        samples: pts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics;
    use crate::flow;

    #[test]
    fn circular_orbits_in_closed_form() {
        let d = kepler_circular(Orientation::Direct, -2.5, 64).unwrap();
        assert!((d.semi_major_axis - 0.25).abs() < 1e-12);
        assert!((d.half_period - std::f64::consts::PI / 7.0).abs() < 1e-12);
        let r = kepler_circular(Orientation::Retrograde, -1.5, 64).unwrap();
        assert!((r.semi_major_axis - 0.25).abs() < 1e-12);
        assert!((r.half_period - std::f64::consts::PI / 9.0).abs() < 1e-12);
        assert_eq!(r.geometric_type, OrbitType::I);
        let z = r.start();
        assert!((z.q1 - 0.25).abs() < 1e-15 && (z.p2 + 2.0).abs() < 1e-12);
    }

    #[test]
    fn kepler_state_solves_the_equations_of_motion() {
        let kind = ProblemKind::RotatingKepler;
        let spec = KeplerOrbitSpec { k: 3, l: 1, orientation: Orientation::Direct, c: -1.5 };
        let orb = kepler_oracle(spec, 10).unwrap();
        let z0 = orb.start();
        let h = dynamics::hamiltonian(&kind, z0).unwrap();
        assert!((h + 1.5).abs() < 1e-12, "{h}");
        let t = 0.7;
        let traj = flow::integrate_plane(&kind, z0, t, &IntegratorConfig::default()).unwrap();
        let (_, y) = traj.end();
        let exact = kepler_state(orb.semi_major_axis, orb.eccentricity, Orientation::Direct, t).unwrap();
        for (a, b) in y.iter().zip(exact.to_array()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn infeasible_kepler_spec_reports_range() {
        let spec = KeplerOrbitSpec { k: 1, l: 1, orientation: Orientation::Direct, c: -5.0 };
        let err = kepler_oracle(spec, 10).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(ref m) if m.contains("feasible")));
    }

    #[test]
    fn synthetic_doubly_invariant_curve() {
        // ellipse q = (2 cos t, sin t), p = (-sin t, 2 cos t) is invariant under both reflections
        let pts: Vec<Vec<f64>> = (0..=400)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 400.0;
                vec![2.0 * t.cos(), t.sin(), -t.sin(), 2.0 * t.cos()]
            })
            .collect();
        let r = |z: &[f64]| vec![z[0], -z[1], -z[2], z[3]];
        let rp = |z: &[f64]| vec![-z[0], z[1], z[2], -z[3]];
        assert!(trace_invariance_distance(&pts, r) < 1e-3);
        assert!(trace_invariance_distance(&pts, rp) < 1e-3);
        // shifted copy is symmetric under the first map only
        let shifted: Vec<Vec<f64>> = pts.iter().map(|z| vec![z[0] + 0.5, z[1], z[2], z[3]]).collect();
        assert!(trace_invariance_distance(&shifted, r) < 1e-3);
        assert!(trace_invariance_distance(&shifted, rp) > 0.1);
    }

    #[test]
    fn retrograde_circular_orbit_from_shooting() {
        let s = RegularizedSurface::new(ProblemKind::RotatingKepler, Primary::Earth, -1.5).unwrap();
        // the circular orbit q = (0.25, 0), p = (0, -2) lifted to the sphere
        let z = PlanePhasePoint::new(0.25, 0.0, 0.0, -2.0);
        let w = moser::inverse_moser_map(z, &s.kind, Primary::Earth).unwrap();
        assert!(w.xi[1].abs() < 1e-15 && w.eta[0].abs() < 1e-15 && w.eta[2].abs() < 1e-15);
        let theta = fiber_angle(&w);
        let (r, shot) = shooting_residual(&s, Circle::Plus, theta, &ShootingConfig::default()).unwrap().unwrap();
        assert!(r.abs() < 1e-8, "{r}");
        assert!((shot.t_phys[0] - std::f64::consts::PI / 9.0).abs() < 1e-8);
        assert_eq!(shot.landing(1), Some(Circle::Minus));
    }
}
