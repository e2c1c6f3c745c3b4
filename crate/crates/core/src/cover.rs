//! Star-shaped hypersurfaces in R^4 with the standard Liouville form, the
//! Levi-Civita double cover of the regularized energy surface, Reeb flows,
//! and convexity checks.
//!
//! Points are `z = (x1, x2, y1, y2)`; the complex structure is `i(x, y) = (-y, x)`,
//! `omega = dx ^ dy` and `alpha = 1/2 (x dy - y dx)`.

use nalgebra::{Matrix2, Matrix3, Matrix4, SVector, Vector4};
use num_dual::DualNum;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PlanePhasePoint, ProblemKind};
use crate::error::{Error, Primary, Result};
use crate::index::{self, IndexValue, SymplecticPath};
use crate::moser::{self, RegularizedSurface, SpherePhasePoint};
use crate::ode::{self, Event, IntegratorConfig, OdeSystem};
use crate::roots;

pub type Point4 = [f64; 4];

/// A hypersurface `S = {G = 0}` star-shaped about the origin, `G < 0` inside.
pub trait DefiningFunction: Sync {
    fn value(&self, z: &Point4) -> f64;
    fn gradient(&self, z: &Point4) -> Vector4<f64>;
    fn hessian(&self, z: &Point4) -> Matrix4<f64>;

    /// Largest radius searched along rays.
    fn ray_limit(&self) -> f64 {
        10.0
    }

    /// True once a ray has left the region whose boundary is `S`.
    fn past_component(&self, _z: &Point4) -> bool {
        false
    }

    /// Physical time per unit time of the Hamiltonian flow of `G`.
    fn time_weight(&self, _z: &Point4) -> f64 {
        1.0
    }
}

pub fn complex_i(z: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(-z[2], -z[3], z[0], z[1])
}

/// `j(z1, z2) = (-conj z2, conj z1)`.
pub fn complex_j(z: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(-z[1], z[0], z[3], -z[2])
}

pub fn complex_k(z: &Vector4<f64>) -> Vector4<f64> {
    complex_i(&complex_j(z))
}

pub fn omega(u: &Vector4<f64>, w: &Vector4<f64>) -> f64 {
    complex_i(u).dot(w)
}

/// `alpha_z(w)`.
pub fn liouville_form(z: &Vector4<f64>, w: &Vector4<f64>) -> f64 {
    0.5 * (z[0] * w[2] + z[1] * w[3] - z[2] * w[0] - z[3] * w[1])
}

/// Hamiltonian field of `G`: `x' = -G_y`, `y' = G_x`.
pub fn hamiltonian_field<S: DefiningFunction + ?Sized>(s: &S, z: &Point4) -> Vector4<f64> {
    complex_i(&s.gradient(z))
}

/// Reeb field `X_G / alpha(X_G)`.
pub fn reeb_field<S: DefiningFunction + ?Sized>(s: &S, z: &Point4) -> Result<Vector4<f64>> {
    let x = hamiltonian_field(s, z);
    let a = liouville_form(&Vector4::from(*z), &x);
    if !(a > 0.0) {
        return Err(Error::Numerical(format!("surface is not transverse to the Liouville field at {z:?}")));
    }
    Ok(x / a)
}

pub fn reeb_jacobian<S: DefiningFunction + ?Sized>(s: &S, z: &Point4) -> Matrix4<f64> {
    let zv = Vector4::from(*z);
    let g = s.gradient(z);
    let h = s.hessian(z);
    let x = complex_i(&g);
    let a = 0.5 * zv.dot(&g);
    let da = (g + h.transpose() * zv) * 0.5;
    let mut ji = Matrix4::zeros();
    for k in 0..4 {
        let mut e = Vector4::zeros();
        e[k] = 1.0;
        ji.set_column(k, &complex_i(&e));
    }
    ji * h / a - x * da.transpose() / (a * a)
}

/// Point of `S` on the ray through `dir` (the first root of `G`).
pub fn ray_point<S: DefiningFunction + ?Sized>(s: &S, dir: &Point4) -> Result<Point4> {
    let n = (dir.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let d = dir.map(|v| v / n);
    let at = |t: f64| d.map(|v| v * t);
    let g = |t: f64| s.value(&at(t));
    let limit = s.ray_limit();
    let mut lo = 0.0;
    let mut t = 1e-3 * limit;
    while g(t) < 0.0 {
        lo = t;
        t *= 1.1;
        if t > limit {
            return Err(Error::Sampling(format!("no surface point on the ray through {dir:?}")));
        }
    }
    let r = roots::brent(g, lo, t, 1e-15, 200)?;
    Ok(at(r))
}

/// Sign changes of `G` along the ray before it leaves the component.
pub fn ray_root_count<S: DefiningFunction + ?Sized>(s: &S, dir: &Point4, samples: usize) -> usize {
    let n = (dir.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let d = dir.map(|v| v / n);
    let limit = s.ray_limit();
    let mut count = 0;
    let mut prev = -1.0f64;
    for k in 1..=samples {
        let z = d.map(|v| v * limit * k as f64 / samples as f64);
        if count > 0 && s.past_component(&z) {
            break;
        }
        let v = s.value(&z);
        if v != 0.0 {
            if v.signum() != prev.signum() {
                count += 1;
            }
            prev = v;
        }
    }
    count
}

/// Uniform random directions on the unit sphere in R^4.
pub fn random_directions(n: usize, seed: u64) -> Vec<Point4> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let d: Point4 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let r2: f64 = d.iter().map(|v| v * v).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            out.push(d.map(|v| v / r2.sqrt()));
        }
    }
    out
}

/// Levi-Civita cover of the regularized energy surface around one primary:
/// `q - q_P = u^2`, `p = v / (2 conj u)` with `x = v`, `y = u`.
#[derive(Debug, Clone, Serialize)]
pub struct CoverSurface {
    pub surface: RegularizedSurface,
    m_p: f64,
    q_p: [f64; 2],
    /// `(m_O, q_P - q_O)`.
    others: Vec<(f64, [f64; 2])>,
    hill: bool,
}

impl CoverSurface {
    pub fn new(kind: ProblemKind, primary: Primary, c: f64) -> Result<Self> {
        let surface = RegularizedSurface::new(kind, primary, c)?;
        let (m_p, q_p) = moser::primary_data(&kind, primary)?;
        let others =
            kind.attractors().into_iter().filter(|(_, _, p)| *p != primary).map(|(m, q, _)| (m, [q_p[0] - q[0], q_p[1] - q[1]])).collect();
        let hill = matches!(kind, ProblemKind::HillLunar);
        Ok(Self { surface, m_p, q_p, others, hill })
    }

    pub fn c(&self) -> f64 {
        self.surface.c
    }

    /// `|u|^2 (H - c)` written without the collision singularity.
    pub fn g_generic<D: DualNum<Primitive = f64> + Copy>(&self, z: &SVector<D, 4>) -> D {
        let (v1, v2, u1, u2) = (z[0], z[1], z[2], z[3]);
        let uu = u1 * u1 + u2 * u2;
        // q - q_P = u^2 and |u|^2 p = v u / 2
        let w1 = u1 * u1 - u2 * u2;
        let w2 = u1 * u2 * 2.0;
        let q1 = w1 + self.q_p[0];
        let q2 = w2 + self.q_p[1];
        let pp1 = (v1 * u1 - v2 * u2) * 0.5;
        let pp2 = (v1 * u2 + v2 * u1) * 0.5;
        let mut g = (v1 * v1 + v2 * v2) * 0.125 - self.m_p + q2 * pp1 - q1 * pp2 - uu * self.surface.c;
        for &(m, d) in &self.others {
            let dx = w1 + d[0];
            let dy = w2 + d[1];
            g -= uu * m / (dx * dx + dy * dy).sqrt();
        }
        if self.hill {
            g += uu * (q2 * q2 * 0.5 - q1 * q1);
        }
        g
    }

    /// Levi-Civita map to the plane (undefined at collisions `u = 0`).
    pub fn to_plane(&self, z: &Point4) -> Result<PlanePhasePoint> {
        let [v1, v2, u1, u2] = *z;
        let uu = u1 * u1 + u2 * u2;
        if uu == 0.0 {
            return Err(Error::Collision(self.surface.primary));
        }
        let q = [u1 * u1 - u2 * u2 + self.q_p[0], 2.0 * u1 * u2 + self.q_p[1]];
        let p = [(v1 * u1 - v2 * u2) / (2.0 * uu), (v1 * u2 + v2 * u1) / (2.0 * uu)];
        Ok(PlanePhasePoint::new(q[0], q[1], p[0], p[1]))
    }

    /// The covering map to the regularized surface in `T^*S^2`.
    pub fn project(&self, z: &Point4) -> SpherePhasePoint {
        let [v1, v2, u1, u2] = *z;
        let uu = u1 * u1 + u2 * u2;
        let vv = v1 * v1 + v2 * v2;
        let den = vv + 4.0 * uu;
        // complex products u v, u^2, v^2
        let uv = [u1 * v1 - u2 * v2, u1 * v2 + u2 * v1];
        let u2c = [u1 * u1 - u2 * u2, 2.0 * u1 * u2];
        let v2c = [v1 * v1 - v2 * v2, 2.0 * v1 * v2];
        SpherePhasePoint::new(
            [(vv - 4.0 * uu) / den, -4.0 * uv[0] / den, -4.0 * uv[1] / den],
            [-0.5 * (u1 * v1 + u2 * v2), 0.5 * u2c[0] - 0.125 * v2c[0], 0.5 * u2c[1] - 0.125 * v2c[1]],
        )
    }

    /// Both preimages of a point of the regularized surface.
    pub fn preimages(&self, w: &SpherePhasePoint) -> Result<[Point4; 2]> {
        let z = if w.xi[0] < 1.0 - 1e-9 {
            let pz = moser::moser_map(w, &self.surface.kind, self.surface.primary)?;
            let (a, b) = complex_sqrt(pz.q1 - self.q_p[0], pz.q2 - self.q_p[1]);
            // v = 2 conj(u) p
            let v = [2.0 * (a * pz.p1 + b * pz.p2), 2.0 * (a * pz.p2 - b * pz.p1)];
            [v[0], v[1], a, b]
        } else {
            // collision: u = 0 and eta_perp = -v^2 / 8
            let (a, b) = complex_sqrt(-8.0 * w.eta[1], -8.0 * w.eta[2]);
            [a, b, 0.0, 0.0]
        };
        Ok([z, z.map(|v| -v)])
    }

    /// `(x1, x2, y1, y2) -> (-x1, x2, y1, -y2)`.
    pub fn involution(z: &Point4) -> Point4 {
        [-z[0], z[1], z[2], -z[3]]
    }
}

fn complex_sqrt(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    let re = (0.5 * (r + a)).max(0.0).sqrt();
    let im = (0.5 * (r - a)).max(0.0).sqrt();
    (re, if b < 0.0 { -im } else { im })
}

impl DefiningFunction for CoverSurface {
    fn value(&self, z: &Point4) -> f64 {
        self.g_generic(&SVector::from(*z))
    }

    fn gradient(&self, z: &Point4) -> Vector4<f64> {
        num_dual::gradient(|u| self.g_generic(&u), &Vector4::from(*z)).1
    }

    fn hessian(&self, z: &Point4) -> Matrix4<f64> {
        num_dual::hessian(|u| self.g_generic(&u), &Vector4::from(*z)).2
    }

    fn ray_limit(&self) -> f64 {
        // |v|^2 / 8 = m_P bounds the collision fiber; positions stay within the unit scale
        (8.0 * self.m_p).sqrt().max(2.0) * 4.0
    }

    fn past_component(&self, z: &Point4) -> bool {
        match self.to_plane(z) {
            Ok(p) => dynamics::effective_potential(&self.surface.kind, p.position()).map_or(true, |u| u > self.surface.c),
            Err(_) => false,
        }
    }

    fn time_weight(&self, z: &Point4) -> f64 {
        z[2] * z[2] + z[3] * z[3]
    }
}

/// Reeb flow on `S`, carrying physical time and optionally the linearization.
pub struct ReebSystem<'a, S: DefiningFunction + ?Sized> {
    pub surface: &'a S,
    pub variational: bool,
}

impl<S: DefiningFunction + ?Sized> OdeSystem for ReebSystem<'_, S> {
    fn dim(&self) -> usize {
        if self.variational {
            21
        } else {
            5
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let z = [y[0], y[1], y[2], y[3]];
        let x = hamiltonian_field(self.surface, &z);
        let a = liouville_form(&Vector4::from(z), &x);
        if !(a > 0.0) {
            return Err(Error::Numerical("Reeb field undefined (Liouville field tangent)".into()));
        }
        dy[..4].copy_from_slice((x / a).as_slice());
        dy[4] = self.surface.time_weight(&z) / a;
        if self.variational {
            let j = reeb_jacobian(self.surface, &z);
            let phi = Matrix4::from_column_slice(&y[5..21]);
            dy[5..21].copy_from_slice((j * phi).as_slice());
        }
        Ok(())
    }

    fn error_dim(&self) -> usize {
        5
    }

    fn project(&self, y: &mut [f64]) -> f64 {
        let z = [y[0], y[1], y[2], y[3]];
        let g = self.surface.value(&z);
        let n = self.surface.gradient(&z);
        let step = n * (g / n.norm_squared());
        for k in 0..4 {
            y[k] -= step[k];
        }
        g.abs()
    }
}

fn reeb_state(z0: &Point4, variational: bool) -> Vec<f64> {
    let mut y = z0.to_vec();
    y.push(0.0);
    if variational {
        y.extend_from_slice(Matrix4::<f64>::identity().as_slice());
    }
    y
}

#[derive(Debug, Clone)]
pub struct ReebTrajectory {
    pub tau: Vec<f64>,
    pub points: Vec<Point4>,
    pub t_phys: Vec<f64>,
    pub phi: Vec<Matrix4<f64>>,
}

impl ReebTrajectory {
    fn from_solution(sol: ode::Solution, variational: bool) -> Self {
        let mut out = ReebTrajectory { tau: sol.t, points: vec![], t_phys: vec![], phi: vec![] };
        for y in &sol.y {
            out.points.push([y[0], y[1], y[2], y[3]]);
            out.t_phys.push(y[4]);
            if variational {
                out.phi.push(Matrix4::from_column_slice(&y[5..21]));
            }
        }
        out
    }

    pub fn end(&self) -> Point4 {
        *self.points.last().unwrap()
    }
}

pub fn integrate_reeb<S: DefiningFunction + ?Sized>(
    s: &S,
    z0: &Point4,
    tau_end: f64,
    variational: bool,
    cfg: &IntegratorConfig,
) -> Result<ReebTrajectory> {
    let sys = ReebSystem { surface: s, variational };
    let sol = ode::solve(&sys, 0.0, &reeb_state(z0, variational), tau_end, cfg, None)?;
    Ok(ReebTrajectory::from_solution(sol, variational))
}

/// Integrates until the physical time reaches `t_target`.
pub fn integrate_reeb_to_time<S: DefiningFunction + ?Sized>(
    s: &S,
    z0: &Point4,
    t_target: f64,
    tau_max: f64,
    variational: bool,
    cfg: &IntegratorConfig,
) -> Result<ReebTrajectory> {
    let sys = ReebSystem { surface: s, variational };
    let ev = Event { direction: 1, ..Event::new(move |y: &[f64]| y[4] - t_target, 0.0) };
    let sol = ode::solve(&sys, 0.0, &reeb_state(z0, variational), tau_max, cfg, Some(&ev))?;
    if sol.termination != ode::Termination::Event {
        return Err(Error::Numerical(format!("physical time {t_target} not reached within Reeb time {tau_max}")));
    }
    Ok(ReebTrajectory::from_solution(sol, variational))
}

/// Symplectic frame of `xi = ker alpha` on `S` from the quaternion frame `(j n, k n)`,
/// projected along the Reeb field; it extends over `S`, so capping disks are irrelevant.
pub fn contact_frame<S: DefiningFunction + ?Sized>(s: &S, z: &Point4) -> Result<(Vector4<f64>, Vector4<f64>)> {
    let n = s.gradient(z);
    let r = reeb_field(s, z)?;
    let zv = Vector4::from(*z);
    let jn = complex_j(&n);
    let kn = complex_k(&n);
    let f1 = jn - r * liouville_form(&zv, &jn);
    let f2 = kn - r * liouville_form(&zv, &kn);
    let nn = n.norm();
    Ok((f1 / nn, f2 / nn))
}

/// Linearized Reeb flow on `xi` in the quaternion frame.
pub fn linearized_reeb<S: DefiningFunction + ?Sized>(s: &S, traj: &ReebTrajectory) -> Result<(Vec<f64>, Vec<Matrix2<f64>>)> {
    let (a1, a2) = contact_frame(s, &traj.points[0])?;
    let mut psi = Vec::with_capacity(traj.tau.len());
    for (k, z) in traj.points.iter().enumerate() {
        let (b1, b2) = contact_frame(s, z)?;
        let w1 = traj.phi[k] * a1;
        let w2 = traj.phi[k] * a2;
        let mut m = Matrix2::new(omega(&w1, &b2), omega(&w2, &b2), omega(&b1, &w1), omega(&b1, &w2));
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(Error::FrameDegenerate { t: traj.tau[k], reason: format!("transition determinant {det:.3e}") });
        }
        m /= det.sqrt();
        psi.push(m);
    }
    Ok((traj.tau.clone(), psi))
}

/// Conley-Zehnder index of the closed Reeb orbit through `z0` with period `tau`.
pub fn reeb_orbit_cz<S: DefiningFunction + ?Sized>(s: &S, z0: &Point4, tau: f64, cfg: &IntegratorConfig) -> Result<IndexValue> {
    let mut cfg = cfg.clone();
    cfg.max_step = cfg.max_step.min(tau / 400.0);
    let traj = integrate_reeb(s, z0, tau, true, &cfg)?;
    let (t, psi) = linearized_reeb(s, &traj)?;
    index::cz_index(&SymplecticPath::from_2x2(t, &psi)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples: usize,
    /// Smallest eigenvalue of the Hessian on `T S`, divided by `|grad G|`.
    pub min_restricted_eigenvalue: f64,
    pub location: Point4,
    pub margin: f64,
    pub pass: bool,
    /// The minimum is negative beyond the margin and rounding error.
    pub certified_negative: bool,
}

/// Restricted Hessian eigenvalues at `z`, scaled by `1/|grad G|`, with the
/// scaled Hessian norm.
pub fn restricted_hessian_eigenvalues<S: DefiningFunction + ?Sized>(s: &S, z: &Point4) -> (nalgebra::Vector3<f64>, f64) {
    let n = s.gradient(z);
    let h = s.hessian(z);
    let nn = n.norm();
    let basis = [complex_i(&n) / nn, complex_j(&n) / nn, complex_k(&n) / nn];
    let b = Matrix3::from_fn(|a, c| basis[a].dot(&(h * basis[c])));
    let eig = b.symmetric_eigenvalues() / nn;
    (eig, h.norm() / nn)
}

pub fn strict_convexity_check<S: DefiningFunction + ?Sized>(s: &S, samples: usize, seed: u64) -> Result<ConvexityReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let dirs = random_directions(samples, seed);
    let results: Vec<Result<(f64, f64, Point4)>> = dirs
        .par_iter()
        .map(|d| {
            let z = ray_point(s, d)?;
            let (eig, norm) = restricted_hessian_eigenvalues(s, &z);
            Ok((eig.min(), norm, z))
        })
        .collect();
    let mut best: Option<(f64, f64, Point4)> = None;
    for r in results {
        let r = r?;
        // ties keep the earlier sample, so the reduction is deterministic
        if best.is_none_or(|b| r.0 < b.0) {
            best = Some(r);
        }
    }
    let (min, norm, location) = best.unwrap();
    let margin = 1e-8 * norm;
    Ok(ConvexityReport {
        samples,
        min_restricted_eigenvalue: min,
        location,
        margin,
        pass: min > margin,
        certified_negative: min < -(margin + 64.0 * f64::EPSILON * norm),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub samples: usize,
    /// Largest `|Q(Pi z) - level| / level` over points of `S`.
    pub level_error: f64,
    /// Largest `|Pi(z) - w|` over both preimages of sampled points of the regularized surface.
    pub preimage_error: f64,
    pub involution_error: f64,
    pub reeb_deviation: f64,
    pub central_symmetry_error: f64,
    pub starshape_failures: usize,
}

impl ContractReport {
    pub fn verify(&self) -> Result<()> {
        let fail = |clause: &'static str, detail: String| Err(Error::CoverContract { clause, detail });
        if !(self.level_error <= 1e-8 && self.preimage_error <= 1e-8) {
            return fail("i", format!("level error {:.2e}, preimage error {:.2e}", self.level_error, self.preimage_error));
        }
        if !(self.involution_error <= 1e-8) {
            return fail("ii", format!("involution mismatch {:.2e}", self.involution_error));
        }
        if !(self.reeb_deviation <= 1e-6) {
            return fail("iii", format!("Reeb flow deviates by {:.2e}", self.reeb_deviation));
        }
        if self.starshape_failures > 0 || !(self.central_symmetry_error <= 1e-9) {
            return fail("iv", format!("{} rays fail, symmetry error {:.2e}", self.starshape_failures, self.central_symmetry_error));
        }
        Ok(())
    }
}

fn sphere_distance(a: &SpherePhasePoint, b: &SpherePhasePoint) -> f64 {
    (a.to_vec6() - b.to_vec6()).norm()
}

/// Regularized-surface state reached at physical time `t` from `w0`.
fn sphere_state_at_time(surface: &RegularizedSurface, w0: &SpherePhasePoint, t: f64, cfg: &IntegratorConfig) -> Result<SpherePhasePoint> {
    let sys = crate::flow::SphereSystem { surface, variational: false };
    let mut y0: Vec<f64> = w0.to_vec6().iter().copied().collect();
    y0.push(0.0);
    let ev = Event { direction: 1, ..Event::new(move |y: &[f64]| y[6] - t, 0.0) };
    let sol = ode::solve(&sys, 0.0, &y0, 1e3, cfg, Some(&ev))?;
    let y = sol.y.last().unwrap();
    Ok(SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]))
}

/// Maximal deviation between `Pi` of a Reeb trajectory and the regularized flow
/// at matching physical times.
pub fn reeb_projection_deviation(
    cover: &CoverSurface,
    z0: &Point4,
    tau_end: f64,
    checkpoints: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let traj = integrate_reeb(cover, z0, tau_end, false, cfg)?;
    let w0 = cover.project(z0);
    let n = traj.tau.len();
    let picks: Vec<usize> = (1..=checkpoints).map(|k| k * (n - 1) / checkpoints).collect();
    let devs: Vec<Result<f64>> = picks
        .par_iter()
        .map(|&k| {
            let w = sphere_state_at_time(&cover.surface, &w0, traj.t_phys[k], cfg)?;
            Ok(sphere_distance(&w, &cover.project(&traj.points[k])))
        })
        .collect();
    devs.into_iter().try_fold(0.0f64, |m, d| Ok(m.max(d?)))
}

/// Evaluates the four contract clauses of the cover on random samples.
pub fn cover_contract(cover: &CoverSurface, samples: usize, seed: u64, cfg: &IntegratorConfig) -> Result<ContractReport> {
    let level = cover.surface.level;
    let dirs = random_directions(samples, seed);
    let points: Vec<Point4> = dirs.par_iter().map(|d| ray_point(cover, d)).collect::<Result<_>>()?;
    let mut report = ContractReport {
        samples,
        level_error: 0.0,
        preimage_error: 0.0,
        involution_error: 0.0,
        reeb_deviation: 0.0,
        central_symmetry_error: 0.0,
        starshape_failures: 0,
    };
    for z in &points {
        let w = cover.project(z);
        report.level_error = report.level_error.max((cover.surface.q_value(&w) - level).abs() / level);
        report.level_error = report.level_error.max(w.constraint_drift());
        let lhs = cover.project(&CoverSurface::involution(z));
        let rhs = moser::regularized_involution(&w);
        report.involution_error = report.involution_error.max(sphere_distance(&lhs, &rhs));
        let scale = cover.gradient(z).norm() * z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        report.central_symmetry_error = report.central_symmetry_error.max(cover.value(&z.map(|v| -v)).abs() / scale);
    }
    report.starshape_failures = dirs.par_iter().filter(|d| ray_root_count(cover, d, 4000) != 1).count();

    // points of the regularized surface along random fiber directions
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..samples {
        let xi = unit3(&mut rng);
        let mut u = unit3(&mut rng);
        let d = moser::dot3(u, xi);
        u = [u[0] - d * xi[0], u[1] - d * xi[1], u[2] - d * xi[2]];
        let nu = moser::dot3(u, u).sqrt();
        if nu < 1e-3 {
            continue;
        }
        u = u.map(|v| v / nu);
        let t = cover.surface.fiber_root_along(xi, u)?;
        let w = SpherePhasePoint::new(xi, u.map(|v| v * t));
        for z in cover.preimages(&w)? {
            report.preimage_error = report.preimage_error.max(sphere_distance(&cover.project(&z), &w));
            report.preimage_error = report.preimage_error.max(cover.value(&z).abs() / cover.m_p);
        }
    }

    report.reeb_deviation = reeb_projection_deviation(cover, &points[0], 2.0, 8, cfg)?;
    Ok(report)
}

fn unit3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let r2 = moser::dot3(v, v);
        if r2 > 1e-4 && r2 <= 1.0 {
            return v.map(|x| x / r2.sqrt());
        }
    }
}

/// Builds the cover and checks its contract.
pub fn levi_civita_cover(
    kind: ProblemKind,
    primary: Primary,
    c: f64,
    samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(CoverSurface, ContractReport)> {
    let cover = CoverSurface::new(kind, primary, c)?;
    let report = cover_contract(&cover, samples, seed, cfg)?;
    report.verify()?;
    Ok((cover, report))
}

/// Lift of the closed orbit `x^2` of a symmetric orbit to the cover.
#[derive(Debug, Clone, Serialize)]
pub struct LiftedOrbit {
    pub start: Point4,
    /// Physical period of the closed lift.
    pub period_physical: f64,
    /// The lift of `x^2` ends at `-start`, so the closed lift runs twice as long
    /// and is invariant under `-Id`.
    pub centrally_symmetric: bool,
    /// One pass over `x^2`.
    pub samples: Vec<Point4>,
}

fn dist4(a: &Point4, b: &Point4) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Lifts `x^2` continuously, starting from the preimage `branch` (0 or 1).
pub fn lift_orbit(cover: &CoverSurface, orbit: &crate::orbits::SymmetricOrbit, branch: usize) -> Result<LiftedOrbit> {
    let curve = orbit.doubled();
    let mut samples = Vec::with_capacity(curve.samples.len());
    let mut cur = cover.preimages(&curve.samples[0].point)?[branch.min(1)];
    samples.push(cur);
    for s in &curve.samples[1..] {
        let [a, b] = cover.preimages(&s.point)?;
        cur = if dist4(&a, &cur) <= dist4(&b, &cur) { a } else { b };
        samples.push(cur);
    }
    let start = samples[0];
    let back = dist4(&cur, &start);
    let flipped = dist4(&cur, &start.map(|v| -v));
    let centrally_symmetric = flipped < back;
    let factor = if centrally_symmetric { 2.0 } else { 1.0 };
    Ok(LiftedOrbit { start, period_physical: factor * curve.period_physical, centrally_symmetric, samples })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpotCheckEntry {
    pub orbit: usize,
    pub centrally_symmetric: bool,
    pub reeb_period: f64,
    pub closing_error: f64,
    pub cz: IndexValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpotCheckReport {
    pub entries: Vec<SpotCheckEntry>,
    /// Minimum over the supplied orbits only.
    pub min_cz: Option<f64>,
}

/// Conley-Zehnder indices of the closed lifts of the given orbits.
pub fn dynamical_convexity_spot_check(
    cover: &CoverSurface,
    orbits: &[crate::orbits::SymmetricOrbit],
    cfg: &IntegratorConfig,
) -> Result<SpotCheckReport> {
    let entries: Vec<Result<SpotCheckEntry>> = orbits
        .par_iter()
        .enumerate()
        .map(|(k, o)| {
            let lift = lift_orbit(cover, o, 0)?;
            let tau_max = 1e4;
            let traj = integrate_reeb_to_time(cover, &lift.start, lift.period_physical, tau_max, false, cfg)?;
            let tau = *traj.tau.last().unwrap();
            let closing_error = dist4(&traj.end(), &lift.start);
            let cz = reeb_orbit_cz(cover, &lift.start, tau, cfg)?;
            Ok(SpotCheckEntry { orbit: k, centrally_symmetric: lift.centrally_symmetric, reeb_period: tau, closing_error, cz })
        })
        .collect();
    let entries: Vec<SpotCheckEntry> = entries.into_iter().collect::<Result<_>>()?;
    let min_cz = entries.iter().map(|e| e.cz.value()).reduce(f64::min);
    Ok(SpotCheckReport { entries, min_cz })
}
