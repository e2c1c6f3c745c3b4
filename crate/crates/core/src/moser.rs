//! Moser regularization of a bounded energy component.
//!
//! The bounded component around a primary `P` (mass `m_P`) at energy `c` is
//! lifted to a compact hypersurface `Sigma` in `T*S^2`. Points of `T*S^2` are
//! pairs `(xi, eta)` with `|xi| = 1`, `xi . eta = 0`; the stereographic map
//! sends them to `(x, y)` and the plane point is `q = y + q_P`, `p = -x`.
//!
//! With `K = (H - c) |q - q_P|` the regularized Hamiltonian is written as
//! `Q = 1/2 |eta|^2 F^2` where `|eta| F = K o S + m_P`. `F` is polynomial in
//! `(xi, eta)` apart from the distance to the other primary, so `Q` is smooth
//! through the north pole, and `Sigma = Q^{-1}(m_P^2 / 2)`.

use nalgebra::{SMatrix, SVector};
use num_dual::DualNum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PlanePhasePoint, ProblemKind};
use crate::error::{Error, Primary, Result};
use crate::roots;

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePhasePoint {
    pub xi: [f64; 3],
    pub eta: [f64; 3],
}

impl SpherePhasePoint {
    pub const fn new(xi: [f64; 3], eta: [f64; 3]) -> Self {
        Self { xi, eta }
    }

    pub fn from_vec6(v: &Vec6) -> Self {
        Self { xi: [v[0], v[1], v[2]], eta: [v[3], v[4], v[5]] }
    }

    pub fn to_vec6(self) -> Vec6 {
        Vec6::new(self.xi[0], self.xi[1], self.xi[2], self.eta[0], self.eta[1], self.eta[2])
    }

    /// `max(| |xi|^2 - 1 |, |xi . eta|)`.
    pub fn constraint_drift(&self) -> f64 {
        let n = dot3(self.xi, self.xi) - 1.0;
        n.abs().max(dot3(self.xi, self.eta).abs())
    }

    /// Renormalize `xi` and remove the normal part of `eta`.
    pub fn project(self) -> Self {
        let n = dot3(self.xi, self.xi).sqrt();
        let xi = self.xi.map(|v| v / n);
        let d = dot3(xi, self.eta);
        let eta = [self.eta[0] - d * xi[0], self.eta[1] - d * xi[1], self.eta[2] - d * xi[2]];
        Self { xi, eta }
    }

    pub fn is_finite(&self) -> bool {
        self.xi.iter().chain(self.eta.iter()).all(|v| v.is_finite())
    }
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Stereographic projection from the north pole `xi = (1, 0, 0)`.
pub fn stereographic(w: &SpherePhasePoint) -> Result<([f64; 2], [f64; 2])> {
    let [x0, x1, x2] = w.xi;
    let [e0, e1, e2] = w.eta;
    let om = 1.0 - x0;
    if om <= 0.0 {
        return Err(Error::NorthPole);
    }
    Ok(([x1 / om, x2 / om], [e1 * om + x1 * e0, e2 * om + x2 * e0]))
}

pub fn inverse_stereographic(x: [f64; 2], y: [f64; 2]) -> SpherePhasePoint {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = r2 + 1.0;
    let xy = x[0] * y[0] + x[1] * y[1];
    SpherePhasePoint {
        xi: [(r2 - 1.0) / s, 2.0 * x[0] / s, 2.0 * x[1] / s],
        eta: [xy, 0.5 * s * y[0] - xy * x[0], 0.5 * s * y[1] - xy * x[1]],
    }
}

/// Mass and position of the regularized primary for a problem kind.
pub fn primary_data(kind: &ProblemKind, primary: Primary) -> Result<(f64, [f64; 2])> {
    kind.attractors()
        .into_iter()
        .find(|(_, _, p)| *p == primary)
        .map(|(m, q, _)| (m, q))
        .ok_or_else(|| Error::Unsupported(format!("{kind} has no massive {primary}")))
}

/// `M(xi, eta) = (y + q_P, -x)`.
pub fn moser_map(w: &SpherePhasePoint, kind: &ProblemKind, primary: Primary) -> Result<PlanePhasePoint> {
    let (_, qp) = primary_data(kind, primary)?;
    let (x, y) = stereographic(w)?;
    Ok(PlanePhasePoint::new(y[0] + qp[0], y[1] + qp[1], -x[0], -x[1]))
}

pub fn inverse_moser_map(z: PlanePhasePoint, kind: &ProblemKind, primary: Primary) -> Result<SpherePhasePoint> {
    let (_, qp) = primary_data(kind, primary)?;
    Ok(inverse_stereographic([-z.p1, -z.p2], [z.q1 - qp[0], z.q2 - qp[1]]))
}

pub fn k_hamiltonian(kind: &ProblemKind, c: f64, primary: Primary, z: PlanePhasePoint) -> Result<f64> {
    let (_, qp) = primary_data(kind, primary)?;
    let h = dynamics::hamiltonian(kind, z)?;
    Ok((h - c) * (z.q1 - qp[0]).hypot(z.q2 - qp[1]))
}

/// `(xi0, -xi1, xi2, -eta0, eta1, -eta2)`.
pub fn regularized_involution(w: &SpherePhasePoint) -> SpherePhasePoint {
    let [x0, x1, x2] = w.xi;
    let [e0, e1, e2] = w.eta;
    SpherePhasePoint::new([x0, -x1, x2], [-e0, e1, -e2])
}

/// `(xi, eta) -> (xi, -eta)`.
pub fn fiber_reflection(w: &SpherePhasePoint) -> SpherePhasePoint {
    SpherePhasePoint::new(w.xi, w.eta.map(|v| -v))
}

/// Cotangent lift of the reflection `xi1 -> -xi1`.
pub fn lifted_reflection(w: &SpherePhasePoint) -> SpherePhasePoint {
    let [x0, x1, x2] = w.xi;
    let [e0, e1, e2] = w.eta;
    SpherePhasePoint::new([x0, -x1, x2], [e0, -e1, e2])
}

/// `(xi0, xi1, -xi2, -eta0, -eta1, eta2)`, the lift of the second reflection of Hill's problem.
pub fn regularized_involution_prime(w: &SpherePhasePoint) -> SpherePhasePoint {
    let [x0, x1, x2] = w.xi;
    let [e0, e1, e2] = w.eta;
    SpherePhasePoint::new([x0, x1, -x2], [-e0, -e1, e2])
}

/// Defining functions `(xi1, eta0, eta2)` of the fixed locus.
pub fn fixed_locus_residual(w: &SpherePhasePoint) -> [f64; 3] {
    [w.xi[1], w.eta[0], w.eta[2]]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizedSurface {
    pub kind: ProblemKind,
    pub primary: Primary,
    pub c: f64,
    pub level: f64,
    m_p: f64,
    q_p: [f64; 2],
    /// `(m_O, q_P - q_O)` for each other attracting body.
    others: Vec<(f64, [f64; 2])>,
}

impl RegularizedSurface {
    /// Requires `c` below the first critical value (for rotating Kepler `c <= -3/2`
    /// is admitted: the bounded component is then the closed unit disk).
    pub fn new(kind: ProblemKind, primary: Primary, c: f64) -> Result<Self> {
        let (m_p, q_p) = primary_data(&kind, primary)?;
        let crit = dynamics::first_critical_energy(&kind)?;
        let admissible = match kind {
            ProblemKind::RotatingKepler => c <= crit,
            _ => c < crit,
        };
        if !c.is_finite() || !admissible {
            return Err(Error::InvalidParameter(format!("energy {c} is not below the first critical value {crit}")));
        }
        let others =
            kind.attractors().into_iter().filter(|(_, _, p)| *p != primary).map(|(m, q, _)| (m, [q_p[0] - q[0], q_p[1] - q[1]])).collect();
        Ok(Self { kind, primary, c, level: 0.5 * m_p * m_p, m_p, q_p, others })
    }

    pub fn primary_mass(&self) -> f64 {
        self.m_p
    }

    pub fn primary_position(&self) -> [f64; 2] {
        self.q_p
    }

    fn is_hill(&self) -> bool {
        matches!(self.kind, ProblemKind::HillLunar)
    }

    /// `F` with `|eta| F = K o S + m_P`, written for arbitrary dual numbers.
    pub fn f_generic<D: DualNum<Primitive = f64> + Copy>(&self, v: &SVector<D, 6>) -> D {
        let (x0, x1, x2) = (v[0], v[1], v[2]);
        let (e0, e1, e2) = (v[3], v[4], v[5]);
        let one = D::from(1.0);
        let om = one - x0;
        let y1 = e1 * om + x1 * e0;
        let y2 = e2 * om + x2 * e0;
        let mut f = (one + x0) * 0.5 - om * self.c - y2 * x1 + (y1 + self.q_p[0]) * x2;
        for &(m, d) in &self.others {
            let dx = y1 + d[0];
            let dy = y2 + d[1];
            f -= om * m / (dx * dx + dy * dy).sqrt();
        }
        if self.is_hill() {
            f += om * (y2 * y2 * 0.5 - y1 * y1);
        }
        f
    }

    pub fn q_generic<D: DualNum<Primitive = f64> + Copy>(&self, v: &SVector<D, 6>) -> D {
        let f = self.f_generic(v);
        let e2 = v[3] * v[3] + v[4] * v[4] + v[5] * v[5];
        e2 * f * f * 0.5
    }

    pub fn f_value(&self, w: &SpherePhasePoint) -> f64 {
        self.f_generic(&w.to_vec6())
    }

    pub fn q_value(&self, w: &SpherePhasePoint) -> f64 {
        self.q_generic(&w.to_vec6())
    }

    pub fn q_gradient(&self, v: &Vec6) -> (f64, Vec6) {
        num_dual::gradient(|u| self.q_generic(&u), v)
    }

    pub fn q_hessian(&self, v: &Vec6) -> (f64, Vec6, Mat6) {
        num_dual::hessian(|u| self.q_generic(&u), v)
    }

    /// Physical-time speed `dt/ds = m_P |y| = m_P |eta| (1 - xi0)` of the regularized flow.
    pub fn time_factor(&self, w: &SpherePhasePoint) -> f64 {
        self.m_p * dot3(w.eta, w.eta).sqrt() * (1.0 - w.xi[0])
    }

    /// `|eta| F - m_P` along the fiber ray `eta = t u` (u a unit vector tangent at xi).
    fn ray_function(&self, xi: [f64; 3], u: [f64; 3], t: f64) -> f64 {
        let w = SpherePhasePoint::new(xi, u.map(|v| v * t));
        t.abs() * self.f_value(&w) - self.m_p
    }

    /// Whether the position of `(xi, t u)` is still inside the bounded component.
    fn ray_inside(&self, xi: [f64; 3], u: [f64; 3], t: f64) -> bool {
        let w = SpherePhasePoint::new(xi, u.map(|v| v * t));
        let Ok((_, y)) = stereographic(&w) else {
            return true;
        };
        if matches!(self.kind, ProblemKind::RotatingKepler) && y[0].hypot(y[1]) > 1.0 {
            return false;
        }
        let q = [y[0] + self.q_p[0], y[1] + self.q_p[1]];
        match dynamics::effective_potential(&self.kind, q) {
            Ok(u) => u <= self.c,
            Err(_) => true,
        }
    }

    /// Largest ray parameter before the position leaves the bounded component.
    fn ray_extent(&self, xi: [f64; 3], u: [f64; 3]) -> f64 {
        let mut t = 1e-3;
        while t < 1e6 && self.ray_inside(xi, u, t) {
            t *= 1.25;
        }
        t
    }

    /// Smallest root `t > 0` of `|eta| F = m_P` along `eta = t u`.
    pub fn fiber_root_along(&self, xi: [f64; 3], u: [f64; 3]) -> Result<f64> {
        let g = |t: f64| self.ray_function(xi, u, t);
        let mut lo = 0.0;
        let mut hi = 1e-3 * self.m_p.max(1e-3);
        while g(hi) < 0.0 {
            if !self.ray_inside(xi, u, hi) || hi > 1e8 {
                return Err(Error::Bracketing { lo, hi, context: format!("fiber ray at xi = {xi:?} left the bounded component") });
            }
            lo = hi;
            hi *= 2.0;
        }
        roots::brent(g, lo, hi, 1e-14 * hi.max(1.0), 200)
    }

    /// Point of `Sigma` on the fixed locus over `xi = (cos th, 0, sin th)`; `sign` picks `L+` or `L-`.
    pub fn fixed_locus_point(&self, theta: f64, sign: i8) -> Result<SpherePhasePoint> {
        let f = self.fixed_locus_value(theta, sign)?;
        Ok(SpherePhasePoint::new([theta.cos(), 0.0, theta.sin()], [0.0, f, 0.0]))
    }

    /// `f_+(theta) > 0` or `f_-(theta) < 0`.
    pub fn fixed_locus_value(&self, theta: f64, sign: i8) -> Result<f64> {
        let xi = [theta.cos(), 0.0, theta.sin()];
        let s = if sign >= 0 { 1.0 } else { -1.0 };
        let u = [0.0, s, 0.0];
        let t = self.fiber_root_along(xi, u)?;
        Ok(s * t)
    }
}

/// Sign changes of `g` on `(0, t_max]` sampled at `n` points; also counts near-tangential samples.
pub fn count_ray_crossings(g: impl Fn(f64) -> f64, t_max: f64, n: usize, tangential_tol: f64) -> (usize, usize) {
    let mut count = 0;
    let mut tangential = 0;
    // sign of the last nonzero sample
    let mut prev = g(t_max * 1e-9).signum();
    for k in 1..=n {
        let t = t_max * k as f64 / n as f64;
        let v = g(t);
        if v.abs() < tangential_tol {
            tangential += 1;
        }
        if v != 0.0 {
            if v.signum() != prev {
                count += 1;
            }
            prev = v.signum();
        }
    }
    (count, tangential)
}

#[derive(Debug, Clone, Serialize)]
pub struct CircleSample {
    pub theta: f64,
    pub f: f64,
    pub xi0: f64,
    pub xi2: f64,
    /// `q1` of the projected point on the axis.
    pub q1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedLocusCircle {
    pub sign: i8,
    pub samples: Vec<CircleSample>,
}

impl FixedLocusCircle {
    /// Range of `q1` covered by the projected axis segment.
    pub fn projected_segment(&self) -> [f64; 2] {
        let lo = self.samples.iter().map(|s| s.q1).fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().map(|s| s.q1).fold(f64::NEG_INFINITY, f64::max);
        [lo, hi]
    }
}

fn circle(surface: &RegularizedSurface, sign: i8, samples: usize) -> Result<FixedLocusCircle> {
    let qp1 = surface.primary_position()[0];
    let out: Result<Vec<CircleSample>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
            let f = surface.fixed_locus_value(theta, sign)?;
            let xi = [theta.cos(), 0.0, theta.sin()];
            let u = [0.0, f.signum(), 0.0];
            let extent = surface.ray_extent(xi, u);
            let (count, _) = count_ray_crossings(|t| surface.ray_function(xi, u, t), extent, 400, 0.0);
            if count > 1 {
                return Err(Error::NotStarshaped { theta, sign, count });
            }
            Ok(CircleSample { theta, f, xi0: xi[0], xi2: xi[2], q1: qp1 + f * (1.0 - xi[0]) })
        })
        .collect();
    Ok(FixedLocusCircle { sign, samples: out? })
}

/// The two circles `L+` and `L-` making up `Fix R` on `Sigma`.
pub fn fixed_locus_circles(surface: &RegularizedSurface, samples: usize) -> Result<(FixedLocusCircle, FixedLocusCircle)> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    Ok((circle(surface, 1, samples)?, circle(surface, -1, samples)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct StarshapeFailure {
    pub xi: [f64; 3],
    pub direction: [f64; 3],
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StarshapeReport {
    pub samples: usize,
    pub tangential: usize,
    pub failures: Vec<StarshapeFailure>,
}

impl StarshapeReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Counts intersections of fiber rays with `Sigma` over a latitude/longitude grid of
/// base points (`n_base^2`) and `n_dir` directions in each fiber.
pub fn starshape_check(surface: &RegularizedSurface, n_base: usize, n_dir: usize) -> Result<StarshapeReport> {
    if n_base == 0 || n_dir == 0 {
        return Err(Error::InvalidParameter("empty sample set".into()));
    }
    let mut jobs = Vec::new();
    for a in 0..n_base {
        // avoid the exact poles, where the tangent frame below degenerates
        let polar = std::f64::consts::PI * (a as f64 + 0.5) / n_base as f64;
        for b in 0..n_base {
            let az = 2.0 * std::f64::consts::PI * b as f64 / n_base as f64;
            let xi = [polar.cos(), polar.sin() * az.cos(), polar.sin() * az.sin()];
            for d in 0..n_dir {
                let phi = 2.0 * std::f64::consts::PI * d as f64 / n_dir as f64;
                jobs.push((xi, polar, az, phi));
            }
        }
    }
    let results: Vec<(StarshapeFailure, usize)> = jobs
        .into_par_iter()
        .map(|(xi, polar, az, phi)| {
            let e_polar = [-polar.sin(), polar.cos() * az.cos(), polar.cos() * az.sin()];
            let e_az = [0.0, -az.sin(), az.cos()];
            let u = [0, 1, 2].map(|i| phi.cos() * e_polar[i] + phi.sin() * e_az[i]);
            let extent = surface.ray_extent(xi, u);
            let (count, tangential) = count_ray_crossings(|t| surface.ray_function(xi, u, t), extent, 400, 1e-10);
            (StarshapeFailure { xi, direction: u, count }, tangential)
        })
        .collect();
    let samples = results.len();
    let tangential = results.iter().map(|r| r.1).sum();
    let failures = results.into_iter().map(|r| r.0).filter(|f| f.count != 1).collect();
    Ok(StarshapeReport { samples, tangential, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moon_surface(mu: f64, offset: f64) -> RegularizedSurface {
        let kind = ProblemKind::pcrtbp(mu).unwrap();
        let c = dynamics::lagrange_points(mu).unwrap().l(1).energy - offset;
        RegularizedSurface::new(kind, Primary::Moon, c).unwrap()
    }

    #[test]
    fn south_pole_substitution() {
        let w = SpherePhasePoint::new([-1.0, 0.0, 0.0], [0.0, 0.3, -0.7]);
        let (x, y) = stereographic(&w).unwrap();
        assert_eq!(x, [0.0, 0.0]);
        assert_eq!(y, [0.6, -1.4]);
        let back = inverse_stereographic(x, y);
        assert_eq!(back, SpherePhasePoint::new([-1.0, 0.0, 0.0], [0.0, 0.3, -0.7]));
        let kind = ProblemKind::pcrtbp(0.2).unwrap();
        let z = moser_map(&w, &kind, Primary::Moon).unwrap();
        assert!((z.q1 - (0.6 - 0.8)).abs() < 1e-15 && z.q2 == -1.4 && z.p1 == 0.0 && z.p2 == 0.0);
    }

    #[test]
    fn north_pole_is_rejected() {
        let w = SpherePhasePoint::new([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(stereographic(&w).unwrap_err(), Error::NorthPole);
    }

    #[test]
    fn k_example() {
        // H = -1 at |q - q_M| = 2 with c = -2
        let kind = ProblemKind::pcrtbp(0.5).unwrap();
        let mut z = PlanePhasePoint::new(1.5, 0.0, 0.0, 0.0);
        // solve p2 so that H(z) = -1: quadratic 1/2 p2^2 - q1 p2 + V = -1
        let v = dynamics::hamiltonian(&kind, z).unwrap();
        let disc = z.q1 * z.q1 - 2.0 * (v + 1.0);
        z.p2 = z.q1 + disc.sqrt();
        assert!((dynamics::hamiltonian(&kind, z).unwrap() + 1.0).abs() < 1e-13);
        let k = k_hamiltonian(&kind, -2.0, Primary::Moon, z).unwrap();
        assert!((k - 2.0).abs() < 1e-12, "{k}");
    }

    #[test]
    fn q_matches_k_away_from_pole() {
        let s = moon_surface(0.3, 0.1);
        let w = SpherePhasePoint::new([0.0, 0.6, 0.8], [0.2, 0.4, -0.3]).project();
        let z = moser_map(&w, &s.kind, Primary::Moon).unwrap();
        let k = k_hamiltonian(&s.kind, s.c, Primary::Moon, z).unwrap();
        let q = s.q_value(&w);
        assert!((q - 0.5 * (k + s.primary_mass()).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn q_is_smooth_at_north_pole() {
        let s = moon_surface(0.3, 0.1);
        let w = SpherePhasePoint::new([1.0, 0.0, 0.0], [0.0, 0.3, 0.0]);
        let (v, g, h) = s.q_hessian(&w.to_vec6());
        assert!(v.is_finite() && g.iter().all(|x| x.is_finite()) && h.iter().all(|x| x.is_finite()));
        // F = 1 at the pole, so Q = |eta|^2 / 2
        assert!((v - 0.045).abs() < 1e-15);
    }

    #[test]
    fn involution_factorization() {
        let w = SpherePhasePoint::new([0.1, 0.2, 0.3], [0.4, 0.5, 0.6]);
        assert_eq!(regularized_involution(&w), fiber_reflection(&lifted_reflection(&w)));
        assert_eq!(regularized_involution(&regularized_involution(&w)), w);
    }

    #[test]
    fn circles_have_signs_and_sit_on_sigma() {
        let s = moon_surface(0.1, 0.2);
        let (plus, minus) = fixed_locus_circles(&s, 64).unwrap();
        let qm = s.primary_position()[0];
        for (c, sign) in [(&plus, 1.0), (&minus, -1.0)] {
            for smp in &c.samples {
                assert!(smp.f * sign > 0.0);
                let w = SpherePhasePoint::new([smp.xi0, 0.0, smp.xi2], [0.0, smp.f, 0.0]);
                assert!((s.q_value(&w) - s.level).abs() < 1e-9);
                assert!((smp.q1 - qm) * sign >= 0.0);
            }
        }
    }

    #[test]
    fn ray_crossing_counter() {
        assert_eq!(count_ray_crossings(|t| t - 1.0, 3.0, 300, 0.0).0, 1);
        assert_eq!(count_ray_crossings(|t| (t - 1.0) * (t - 2.0) * (t - 3.0), 4.0, 400, 0.0).0, 3);
    }

    #[test]
    fn moon_component_is_starshaped() {
        let s = moon_surface(0.1, 0.2);
        let report = starshape_check(&s, 6, 4).unwrap();
        assert!(report.pass(), "{:?}", report.failures);
    }

    #[test]
    fn surface_rejects_energy_above_l1() {
        let kind = ProblemKind::pcrtbp(0.1).unwrap();
        let c = dynamics::lagrange_points(0.1).unwrap().l(1).energy + 0.01;
        assert!(RegularizedSurface::new(kind, Primary::Moon, c).is_err());
    }
}
