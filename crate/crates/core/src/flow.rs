//! Flows in the plane chart and in the regularized sphere chart, their
//! linearizations and returns to the fixed locus of the reflection.
//!
//! The sphere-chart field lives on R^6: it is `J grad Q` corrected along the
//! normals of `T*S^2` so that `|xi|^2`, `xi . eta` and `Q` are all conserved.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PlanePhasePoint, ProblemKind};
use crate::error::{Error, Result};
use crate::moser::{self, dot3, Mat6, RegularizedSurface, SpherePhasePoint, Vec6};
use crate::ode::{self, Event, IntegratorConfig, OdeSystem, Termination};

pub type Mat4 = Matrix4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Plane,
    Sphere,
}

/// Sampled trajectory. Plane states are `(q1, q2, p1, p2)`; sphere states are
/// `(xi, eta, t_phys)` with `t` the regularized time.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub chart: Chart,
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `H - H(0)` in the plane chart, `Q - Q(0)` in the sphere chart.
    pub energy_drift: Vec<f64>,
}

impl Trajectory {
    pub fn max_energy_drift(&self) -> f64 {
        self.energy_drift.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn end(&self) -> (f64, &[f64]) {
        (*self.t.last().unwrap(), self.states.last().unwrap())
    }
}

pub struct PlaneSystem<'a> {
    pub kind: &'a ProblemKind,
    pub variational: bool,
}

impl OdeSystem for PlaneSystem<'_> {
    fn dim(&self) -> usize {
        if self.variational {
            20
        } else {
            4
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let z = PlanePhasePoint::new(y[0], y[1], y[2], y[3]);
        let x = dynamics::hamiltonian_vector_field(self.kind, z)?;
        dy[..4].copy_from_slice(&x);
        if self.variational {
            let a = Mat4::from(dynamics::vector_field_jacobian(self.kind, z)?).transpose();
            let phi = Mat4::from_column_slice(&y[4..20]);
            dy[4..20].copy_from_slice((a * phi).as_slice());
        }
        Ok(())
    }

    fn singular_distance(&self, y: &[f64]) -> Option<f64> {
        self.kind.attractors().iter().map(|(_, c, _)| (y[0] - c[0]).hypot(y[1] - c[1])).reduce(f64::min)
    }
}

/// Constrained field `X = (Q_eta + b xi, -Q_xi - a xi - b eta)` on R^6.
pub fn sphere_vector_field(surface: &RegularizedSurface, v: &Vec6) -> Vec6 {
    let (_, g) = surface.q_gradient(v);
    let (a, b) = multipliers(v, &g);
    let mut x = Vec6::zeros();
    for i in 0..3 {
        x[i] = g[3 + i] + b * v[i];
        x[3 + i] = -g[i] - a * v[i] - b * v[3 + i];
    }
    x
}

fn multipliers(v: &Vec6, g: &Vec6) -> (f64, f64) {
    let xi = [v[0], v[1], v[2]];
    let eta = [v[3], v[4], v[5]];
    let gx = [g[0], g[1], g[2]];
    let ge = [g[3], g[4], g[5]];
    let n = dot3(xi, xi);
    ((dot3(eta, ge) - dot3(xi, gx)) / n, -dot3(xi, ge) / n)
}

/// Jacobian of [`sphere_vector_field`].
pub fn sphere_vector_field_jacobian(surface: &RegularizedSurface, v: &Vec6) -> Mat6 {
    let (_, g, h) = surface.q_hessian(v);
    let (a, b) = multipliers(v, &g);
    let xi = Vec6::new(v[0], v[1], v[2], 0.0, 0.0, 0.0);
    let eta = Vec6::new(0.0, 0.0, 0.0, v[3], v[4], v[5]);
    let g_xi = Vec6::new(g[0], g[1], g[2], 0.0, 0.0, 0.0);
    let g_eta = Vec6::new(0.0, 0.0, 0.0, g[3], g[4], g[5]);
    let n = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let grad_n = 2.0 * xi;
    let ht = h.transpose();
    let shift_down = |u: &Vec6| Vec6::new(0.0, 0.0, 0.0, u[0], u[1], u[2]);
    let shift_up = |u: &Vec6| Vec6::new(u[3], u[4], u[5], 0.0, 0.0, 0.0);
    // d(eta . Q_eta) = H^T (0, eta) + (0, Q_eta); d(xi . Q_xi) = H^T (xi, 0) + (Q_xi, 0)
    let num = dot3([v[3], v[4], v[5]], [g[3], g[4], g[5]]) - dot3([v[0], v[1], v[2]], [g[0], g[1], g[2]]);
    let grad_num = ht * eta + g_eta - ht * xi - g_xi;
    let xq = dot3([v[0], v[1], v[2]], [g[3], g[4], g[5]]);
    // d(xi . Q_eta) = H^T (0, xi) + (Q_eta, 0)
    let grad_xq = ht * shift_down(&xi) + shift_up(&g_eta);
    let grad_a = grad_num / n - grad_n * (num / (n * n));
    let grad_b = -grad_xq / n + grad_n * (xq / (n * n));

    let mut d = Mat6::zeros();
    for i in 0..3 {
        for j in 0..6 {
            d[(i, j)] = h[(3 + i, j)];
            d[(3 + i, j)] = -h[(i, j)];
        }
    }
    let v1 = Vec6::new(0.0, 0.0, 0.0, -v[0], -v[1], -v[2]);
    let v2 = Vec6::new(v[0], v[1], v[2], -v[3], -v[4], -v[5]);
    d += v1 * grad_a.transpose() + v2 * grad_b.transpose();
    for i in 0..3 {
        d[(3 + i, i)] -= a;
        d[(i, i)] += b;
        d[(3 + i, 3 + i)] -= b;
    }
    d
}

/// Sphere-chart system; state `(xi, eta, t_phys)` optionally followed by the 6x6 linearization.
/// The field is `X_Q / m_P`, so that chart time agrees with the time of `K` and does not
/// stretch with a small primary mass.
pub struct SphereSystem<'a> {
    pub surface: &'a RegularizedSurface,
    pub variational: bool,
}

impl OdeSystem for SphereSystem<'_> {
    fn dim(&self) -> usize {
        if self.variational {
            43
        } else {
            7
        }
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let v = Vec6::from_column_slice(&y[..6]);
        let scale = 1.0 / self.surface.primary_mass();
        let x = sphere_vector_field(self.surface, &v) * scale;
        dy[..6].copy_from_slice(x.as_slice());
        dy[6] = self.surface.time_factor(&SpherePhasePoint::from_vec6(&v)) * scale;
        if self.variational {
            let a = sphere_vector_field_jacobian(self.surface, &v) * scale;
            let phi = Mat6::from_column_slice(&y[7..43]);
            dy[7..43].copy_from_slice((a * phi).as_slice());
        }
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite sphere-chart field".into()));
        }
        Ok(())
    }

    fn error_dim(&self) -> usize {
        7
    }

    fn project(&self, y: &mut [f64]) -> f64 {
        let w = SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
        let drift = w.constraint_drift();
        let p = w.project();
        y[..3].copy_from_slice(&p.xi);
        y[3..6].copy_from_slice(&p.eta);
        drift
    }
}

fn sphere_state(w: &SpherePhasePoint, variational: bool) -> Vec<f64> {
    let mut y: Vec<f64> = w.xi.iter().chain(w.eta.iter()).copied().collect();
    y.push(0.0);
    if variational {
        y.extend_from_slice(Mat6::identity().as_slice());
    }
    y
}

pub fn plane_energy_drift(kind: &ProblemKind, states: &[Vec<f64>]) -> Vec<f64> {
    let h = |s: &[f64]| dynamics::hamiltonian(kind, PlanePhasePoint::new(s[0], s[1], s[2], s[3])).unwrap_or(f64::NAN);
    let h0 = h(&states[0]);
    states.iter().map(|s| h(s) - h0).collect()
}

fn sphere_energy_drift(surface: &RegularizedSurface, states: &[Vec<f64>]) -> Vec<f64> {
    let q = |s: &[f64]| surface.q_value(&SpherePhasePoint::new([s[0], s[1], s[2]], [s[3], s[4], s[5]]));
    let q0 = q(&states[0]);
    states.iter().map(|s| q(s) - q0).collect()
}

pub fn integrate_plane(kind: &ProblemKind, z0: PlanePhasePoint, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !z0.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial state".into()));
    }
    let sys = PlaneSystem { kind, variational: false };
    let sol = ode::solve(&sys, 0.0, &z0.to_array(), t_end, cfg, None)?;
    let energy_drift = plane_energy_drift(kind, &sol.y);
    Ok(Trajectory { chart: Chart::Plane, t: sol.t, states: sol.y, energy_drift })
}

pub fn integrate_sphere(surface: &RegularizedSurface, w0: SpherePhasePoint, s_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    check_sphere_start(&w0, cfg)?;
    let sys = SphereSystem { surface, variational: false };
    let sol = ode::solve(&sys, 0.0, &sphere_state(&w0, false), s_end, cfg, None)?;
    let energy_drift = sphere_energy_drift(surface, &sol.y);
    Ok(Trajectory { chart: Chart::Sphere, t: sol.t, states: sol.y, energy_drift })
}

fn check_sphere_start(w0: &SpherePhasePoint, cfg: &IntegratorConfig) -> Result<()> {
    let drift = w0.constraint_drift();
    if !w0.is_finite() || drift > cfg.constraint_tol.max(1e-10) {
        return Err(Error::InvalidParameter(format!("initial point is off T*S^2 (drift {drift:.3e})")));
    }
    Ok(())
}

/// Outcome of integrating until the orbit meets the fixed locus again.
#[derive(Debug, Clone, Serialize)]
pub enum ReturnOutcome {
    Returned {
        /// Chart time of the return.
        s: f64,
        /// Physical time of the return.
        t_phys: f64,
        state: Vec<f64>,
        /// Defining functions of the fixed locus at the return point.
        residual: Vec<f64>,
    },
    Timeout {
        /// `(time, |g|)` of the closest approach seen.
        closest: Option<(f64, f64)>,
    },
}

impl ReturnOutcome {
    pub fn returned(&self) -> Option<(f64, f64, &[f64], &[f64])> {
        match self {
            Self::Returned { s, t_phys, state, residual } => Some((*s, *t_phys, state, residual)),
            Self::Timeout { .. } => None,
        }
    }
}

/// Sphere chart: stops when the base point returns to the great circle `xi1 = 0`.
pub fn return_to_fixed_locus(
    surface: &RegularizedSurface,
    w0: SpherePhasePoint,
    s_min: f64,
    s_max: f64,
    cfg: &IntegratorConfig,
) -> Result<ReturnOutcome> {
    check_sphere_start(&w0, cfg)?;
    let sys = SphereSystem { surface, variational: false };
    let ev = Event::new(|y: &[f64]| y[1], s_min);
    let sol = ode::solve(&sys, 0.0, &sphere_state(&w0, false), s_max, cfg, Some(&ev))?;
    Ok(match sol.termination {
        Termination::Event => {
            let (s, y) = sol.last();
            let w = SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
            ReturnOutcome::Returned { s, t_phys: y[6], state: y[..6].to_vec(), residual: moser::fixed_locus_residual(&w).to_vec() }
        }
        Termination::Reached => ReturnOutcome::Timeout { closest: sol.closest_event_value },
    })
}

/// Plane chart: stops at the next crossing of the `q1`-axis; residual is `(q2, p1)`.
pub fn return_to_axis(kind: &ProblemKind, z0: PlanePhasePoint, t_min: f64, t_max: f64, cfg: &IntegratorConfig) -> Result<ReturnOutcome> {
    let sys = PlaneSystem { kind, variational: false };
    let ev = Event::new(|y: &[f64]| y[1], t_min);
    let sol = ode::solve(&sys, 0.0, &z0.to_array(), t_max, cfg, Some(&ev))?;
    Ok(match sol.termination {
        Termination::Event => {
            let (t, y) = sol.last();
            ReturnOutcome::Returned { s: t, t_phys: t, state: y.to_vec(), residual: vec![y[1], y[2]] }
        }
        Termination::Reached => ReturnOutcome::Timeout { closest: sol.closest_event_value },
    })
}

/// Linearized flow `D phi^t` of the plane chart at `t_end`.
pub fn plane_monodromy(kind: &ProblemKind, z0: PlanePhasePoint, t_end: f64, cfg: &IntegratorConfig) -> Result<(PlanePhasePoint, Mat4)> {
    let sys = PlaneSystem { kind, variational: true };
    let mut y = z0.to_array().to_vec();
    y.extend_from_slice(Mat4::identity().as_slice());
    let sol = ode::solve(&sys, 0.0, &y, t_end, cfg, None)?;
    let (_, y) = sol.last();
    Ok((PlanePhasePoint::new(y[0], y[1], y[2], y[3]), Mat4::from_column_slice(&y[4..20])))
}

/// Sphere-chart orbit with its linearization sampled at each accepted step.
#[derive(Debug, Clone)]
pub struct VariationalTrajectory {
    pub s: Vec<f64>,
    pub points: Vec<SpherePhasePoint>,
    pub t_phys: Vec<f64>,
    pub phi: Vec<Mat6>,
}

impl VariationalTrajectory {
    pub fn end(&self) -> (f64, SpherePhasePoint, Mat6) {
        let k = self.s.len() - 1;
        (self.s[k], self.points[k], self.phi[k])
    }
}

pub fn sphere_variational(
    surface: &RegularizedSurface,
    w0: SpherePhasePoint,
    s_end: f64,
    cfg: &IntegratorConfig,
) -> Result<VariationalTrajectory> {
    check_sphere_start(&w0, cfg)?;
    let sys = SphereSystem { surface, variational: true };
    let sol = ode::solve(&sys, 0.0, &sphere_state(&w0, true), s_end, cfg, None)?;
    let mut out = VariationalTrajectory { s: sol.t, points: vec![], t_phys: vec![], phi: vec![] };
    for y in &sol.y {
        out.points.push(SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]));
        out.t_phys.push(y[6]);
        out.phi.push(Mat6::from_column_slice(&y[7..43]));
    }
    Ok(out)
}

/// A basis `(e1, e2)` of the contact plane at a point, normalized by `dlambda(e1, e2) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPlaneFrame {
    pub e1: Vec6,
    pub e2: Vec6,
}

/// `dlambda(u, v) = u_eta . v_xi - u_xi . v_eta` for `lambda = eta . dxi`.
pub fn dlambda(u: &Vec6, v: &Vec6) -> f64 {
    (0..3).map(|i| u[3 + i] * v[i] - u[i] * v[3 + i]).sum()
}

/// Coordinates of the class of `w` in `T Sigma / <X>` with respect to a frame.
pub fn frame_coordinates(frame: &ContactPlaneFrame, w: &Vec6) -> [f64; 2] {
    [dlambda(w, &frame.e2), dlambda(&frame.e1, w)]
}

pub type TransitionMatrix = Matrix2<f64>;

#[derive(Debug, Clone)]
pub struct LinearizedFlow {
    pub s: Vec<f64>,
    pub psi: Vec<TransitionMatrix>,
    /// Largest `|det - 1|` removed by renormalization.
    pub max_det_correction: f64,
}

/// Projects the linearization to the contact plane using the frame field.
pub fn linearized_flow(
    traj: &VariationalTrajectory,
    frame: impl Fn(&SpherePhasePoint) -> Result<ContactPlaneFrame>,
) -> Result<LinearizedFlow> {
    let f0 = frame(&traj.points[0])?;
    let mut out = LinearizedFlow { s: vec![], psi: vec![], max_det_correction: 0.0 };
    for k in 0..traj.s.len() {
        let fk = frame(&traj.points[k])?;
        let c1 = frame_coordinates(&fk, &(traj.phi[k] * f0.e1));
        let c2 = frame_coordinates(&fk, &(traj.phi[k] * f0.e2));
        let mut m = TransitionMatrix::new(c1[0], c2[0], c1[1], c2[1]);
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(Error::FrameDegenerate { t: traj.s[k], reason: format!("transition determinant {det:.3e}") });
        }
        out.max_det_correction = out.max_det_correction.max((det - 1.0).abs());
        m /= det.sqrt();
        out.s.push(traj.s[k]);
        out.psi.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Primary;

    #[test]
    fn kepler_circular_half_period() {
        let kind = ProblemKind::RotatingKepler;
        let z0 = PlanePhasePoint::new(0.25, 0.0, 0.0, -2.0);
        let cfg = IntegratorConfig::default();
        let out = return_to_axis(&kind, z0, 1e-6, 10.0, &cfg).unwrap();
        let (t, _, y, res) = out.returned().unwrap();
        assert!((t - std::f64::consts::PI / 9.0).abs() < 1e-10, "{t}");
        assert!(res.iter().all(|r| r.abs() < 1e-8), "{res:?}");
        assert!((y[0] + 0.25).abs() < 1e-9);
    }

    #[test]
    fn lagrange_point_is_stationary() {
        let set = dynamics::lagrange_points(0.2).unwrap();
        let l = set.l(4).position;
        let kind = ProblemKind::pcrtbp(0.2).unwrap();
        // zero velocity in the rotating frame: p = (-q2, q1)
        let z0 = PlanePhasePoint::new(l[0], l[1], -l[1], l[0]);
        let traj = integrate_plane(&kind, z0, 5.0, &IntegratorConfig::default()).unwrap();
        let (_, y) = traj.end();
        for (a, b) in y.iter().zip(z0.to_array()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_jacobian_matches_finite_differences() {
        let kind = ProblemKind::pcrtbp(0.3).unwrap();
        let c = dynamics::lagrange_points(0.3).unwrap().l(1).energy - 0.1;
        let s = RegularizedSurface::new(kind, Primary::Moon, c).unwrap();
        let v = Vec6::new(0.3, 0.5, 0.2, 0.1, -0.4, 0.7);
        let d = sphere_vector_field_jacobian(&s, &v);
        let h = 1e-6;
        for j in 0..6 {
            let mut vp = v;
            let mut vm = v;
            vp[j] += h;
            vm[j] -= h;
            let col = (sphere_vector_field(&s, &vp) - sphere_vector_field(&s, &vm)) / (2.0 * h);
            for i in 0..6 {
                assert!((col[i] - d[(i, j)]).abs() < 1e-6 * (1.0 + d[(i, j)].abs()), "({i},{j}) {} vs {}", col[i], d[(i, j)]);
            }
        }
    }

    #[test]
    fn sphere_flow_projects_to_plane_flow() {
        let kind = ProblemKind::pcrtbp(0.3).unwrap();
        let c = dynamics::lagrange_points(0.3).unwrap().l(1).energy - 0.1;
        let s = RegularizedSurface::new(kind, Primary::Moon, c).unwrap();
        let w0 = s.fixed_locus_point(2.0, 1).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = integrate_sphere(&s, w0, 0.3, &cfg).unwrap();
        let (_, y) = traj.end();
        let w1 = SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
        let z0 = moser::moser_map(&w0, &kind, Primary::Moon).unwrap();
        assert!((dynamics::hamiltonian(&kind, z0).unwrap() - c).abs() < 1e-9);
        let plane = integrate_plane(&kind, z0, y[6], &cfg).unwrap();
        let (_, zp) = plane.end();
        let z1 = moser::moser_map(&w1, &kind, Primary::Moon).unwrap().to_array();
        for i in 0..4 {
            assert!((zp[i] - z1[i]).abs() < 1e-6, "{zp:?} vs {z1:?}");
        }
    }

    #[test]
    fn sphere_field_conserves_constraints() {
        let kind = ProblemKind::pcrtbp(0.3).unwrap();
        let c = dynamics::lagrange_points(0.3).unwrap().l(1).energy - 0.1;
        let s = RegularizedSurface::new(kind, Primary::Moon, c).unwrap();
        let v = Vec6::new(0.3, 0.5, 0.2, 0.1, -0.4, 0.7);
        let x = sphere_vector_field(&s, &v);
        let (_, g) = s.q_gradient(&v);
        assert!(g.dot(&x).abs() < 1e-12);
        assert!((v[0] * x[0] + v[1] * x[1] + v[2] * x[2]).abs() < 1e-12);
        let dxe = (0..3).map(|i| x[i] * v[3 + i] + v[i] * x[3 + i]).sum::<f64>();
        assert!(dxe.abs() < 1e-12);
    }
}
