//! Indices of symmetric periodic orbits on the regularized energy surface.
//!
//! The linearized flow is read in a frame `(e1, e2)` of the contact planes
//! with `e2` vertical. At points of the fixed locus `e1` spans the tangent of
//! the fixed locus, so the reference line is the `e1`-axis throughout.

use nalgebra::{Matrix2, SMatrix, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, ContactPlaneFrame, LinearizedFlow, VariationalTrajectory};
use crate::index::{self, IndexValue, LagrangianLinePath, SymplecticPath};
use crate::moser::{self, RegularizedSurface, SpherePhasePoint, Vec6};
use crate::ode::IntegratorConfig;
use crate::orbits::SymmetricOrbit;

/// Vertical-preserving frame of `ker lambda` at a point of the surface.
pub fn contact_frame(surface: &RegularizedSurface, w: &SpherePhasePoint) -> Result<ContactPlaneFrame> {
    let v = w.to_vec6();
    let (_, g) = surface.q_gradient(&v);
    let xi = nalgebra::Vector3::from(w.xi);
    let eta = nalgebra::Vector3::from(w.eta);
    let q_eta = nalgebra::Vector3::new(g[3], g[4], g[5]);
    let vert = xi.cross(&q_eta);
    let nv = vert.norm();
    if nv < 1e-12 {
        return Err(Error::FrameDegenerate { t: f64::NAN, reason: "vertical part of the contact plane vanishes".into() });
    }
    let e2 = Vec6::new(0.0, 0.0, 0.0, vert[0] / nv, vert[1] / nv, vert[2] / nv);
    // rows: tangency to the sphere, to xi.eta = 0, kernel of lambda, tangency to the level set
    let mut a = SMatrix::<f64, 4, 6>::zeros();
    for i in 0..3 {
        a[(0, i)] = xi[i];
        a[(1, i)] = eta[i];
        a[(1, 3 + i)] = xi[i];
        a[(2, i)] = eta[i];
    }
    for j in 0..6 {
        a[(3, j)] = g[j];
    }
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scale = eig.eigenvalues.amax().max(1e-300);
    if eig.eigenvalues[order[2]] < 1e-14 * scale {
        return Err(Error::FrameDegenerate { t: f64::NAN, reason: "contact plane is not two-dimensional".into() });
    }
    let mut best: Option<Vec6> = None;
    for &k in &order[..2] {
        let n: Vec6 = eig.eigenvectors.column(k).into_owned();
        let u = n - e2 * e2.dot(&n);
        if best.is_none_or(|b| u.norm() > b.norm()) {
            best = Some(u);
        }
    }
    let u = best.unwrap();
    let pair = flow::dlambda(&u, &e2);
    if pair.abs() < 1e-12 {
        return Err(Error::FrameDegenerate { t: f64::NAN, reason: "contact frame is not symplectic".into() });
    }
    Ok(ContactPlaneFrame { e1: u / pair, e2 })
}

/// Linearization of the full orbit `x # x_R` over `[0, 2T]`, with a sample at `T`.
#[derive(Debug, Clone)]
pub struct OrbitLinearization {
    pub half_period: f64,
    pub s: Vec<f64>,
    pub psi: Vec<Matrix2<f64>>,
    /// Index of the sample at `s = T`.
    pub half_index: usize,
    pub max_det_correction: f64,
}

fn join(a: VariationalTrajectory, b: VariationalTrajectory, offset: f64) -> VariationalTrajectory {
    let phi_t = *a.phi.last().unwrap();
    let mut out = a;
    for k in 1..b.s.len() {
        out.s.push(b.s[k] + offset);
        out.points.push(b.points[k]);
        out.t_phys.push(b.t_phys[k]);
        out.phi.push(b.phi[k] * phi_t);
    }
    out
}

/// Linearizes an orbit in the frame given by `frame`.
pub fn linearize_orbit_with(
    surface: &RegularizedSurface,
    orbit: &SymmetricOrbit,
    cfg: &IntegratorConfig,
    frame: impl Fn(&SpherePhasePoint) -> Result<ContactPlaneFrame>,
) -> Result<OrbitLinearization> {
    let t = orbit.half_period;
    let mut cfg = cfg.clone();
    cfg.max_step = cfg.max_step.min(t / 200.0);
    // halve the step until no line turns by more than MAX_LINE_TURN between samples,
    // so iterates can carry any direction through the path
    for _ in 0..6 {
        let first = flow::sphere_variational(surface, orbit.start(), t, &cfg)?;
        let half_index = first.s.len() - 1;
        let (_, mid, _) = first.end();
        let second = flow::sphere_variational(surface, mid, t, &cfg)?;
        let traj = join(first, second, t);
        let lin: LinearizedFlow = flow::linearized_flow(&traj, &frame)?;
        if max_line_turn(&lin.psi) <= MAX_LINE_TURN {
            return Ok(OrbitLinearization {
                half_period: t,
                s: lin.s,
                psi: lin.psi,
                half_index,
                max_det_correction: lin.max_det_correction,
            });
        }
        cfg.max_step /= 2.0;
    }
    Err(Error::Numerical(format!(
        "linearization still turns lines by more than {MAX_LINE_TURN} rad per step at max step {:.2e}",
        cfg.max_step
    )))
}

const MAX_LINE_TURN: f64 = 0.3;

/// Largest angle by which `psi[k+1] psi[k]^-1` moves a line, over all steps.
fn max_line_turn(psi: &[Matrix2<f64>]) -> f64 {
    let dirs: Vec<Vector2<f64>> = (0..64)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / 64.0;
            Vector2::new(a.cos(), a.sin())
        })
        .collect();
    psi.windows(2)
        .filter_map(|w| Some(w[1] * w[0].try_inverse()?))
        .map(|m| {
            dirs.iter()
                .map(|v| {
                    let u = m * v;
                    // angle between lines, in [0, pi/2]
                    (v.perp(&u).abs()).atan2(v.dot(&u).abs())
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub fn linearize_orbit(surface: &RegularizedSurface, orbit: &SymmetricOrbit, cfg: &IntegratorConfig) -> Result<OrbitLinearization> {
    linearize_orbit_with(surface, orbit, cfg, |w| contact_frame(surface, w))
}

impl OrbitLinearization {
    pub fn period(&self) -> f64 {
        2.0 * self.half_period
    }

    pub fn monodromy(&self) -> Matrix2<f64> {
        *self.psi.last().unwrap()
    }

    /// Samples of `Psi` over `[0, m T]` for the `m`-th iterate of `x`.
    pub fn iterate_path(&self, m: usize) -> (Vec<f64>, Vec<Matrix2<f64>>) {
        let full = self.psi.len() - 1;
        let p = self.monodromy();
        let mut t = vec![0.0];
        let mut psi = vec![Matrix2::identity()];
        let mut pj = Matrix2::identity();
        for j in 0..m.div_ceil(2) {
            let last = if 2 * j + 1 == m { self.half_index } else { full };
            for k in 1..=last {
                t.push(self.s[k] + j as f64 * self.period());
                psi.push(self.psi[k] * pj);
            }
            pj = p * pj;
        }
        (t, psi)
    }

    /// Line path `Psi(t) V` for the `m`-th iterate, `V` the first axis.
    pub fn iterate_line_path(&self, m: usize) -> Result<LagrangianLinePath> {
        let full = self.psi.len() - 1;
        let p = self.monodromy();
        let mut t = vec![0.0];
        let mut vecs = vec![[1.0, 0.0]];
        // carry a unit vector instead of powers of the monodromy
        let mut v = Vector2::new(1.0, 0.0);
        for j in 0..m.div_ceil(2) {
            let last = if 2 * j + 1 == m { self.half_index } else { full };
            for k in 1..=last {
                let w = self.psi[k] * v;
                let w = w / w.norm();
                t.push(self.s[k] + j as f64 * self.period());
                vecs.push([w[0], w[1]]);
            }
            v = p * v;
            v /= v.norm();
        }
        LagrangianLinePath::from_vectors(t, &vecs, 0.0)
    }

    /// Line path for the partner `x_R`, which starts at `x(T)`.
    pub fn partner_line_path(&self) -> Result<LagrangianLinePath> {
        let h = self.half_index;
        let inv = self.psi[h].try_inverse().ok_or_else(|| Error::Numerical("singular transition matrix".into()))?;
        let v = inv * Vector2::new(1.0, 0.0);
        let mut t = vec![];
        let mut vecs = vec![];
        for k in h..self.psi.len() {
            let w = self.psi[k] * v;
            let w = w / w.norm();
            t.push(self.s[k] - self.half_period);
            vecs.push([w[0], w[1]]);
        }
        LagrangianLinePath::from_vectors(t, &vecs, 0.0)
    }

    pub fn rs_index(&self) -> Result<IndexValue> {
        index::rs_index_line(&self.iterate_line_path(1)?)
    }

    pub fn partner_rs_index(&self) -> Result<IndexValue> {
        index::rs_index_line(&self.partner_line_path()?)
    }

    pub fn iterate_rs_index(&self, m: usize) -> Result<IndexValue> {
        index::rs_index_line(&self.iterate_line_path(m)?)
    }

    /// Conley-Zehnder index of `x^(2m)` over `[0, 2 m T]`.
    pub fn iterate_cz_index(&self, m: usize) -> Result<IndexValue> {
        let (t, psi) = self.iterate_path(2 * m);
        index::cz_index(&SymplecticPath::from_2x2(t, &psi)?)
    }
}

/// `mu_RS(x, T)` of a symmetric orbit.
pub fn orbit_rs_index(surface: &RegularizedSurface, orbit: &SymmetricOrbit, cfg: &IntegratorConfig) -> Result<IndexValue> {
    linearize_orbit(surface, orbit, cfg)?.rs_index()
}

/// Grading in Rabinowitz Floer homology, `mu_RS + 1/2` in this dimension.
pub fn rfh_index(mu_rs: &IndexValue) -> IndexValue {
    mu_rs.shifted(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIndexReport {
    pub m_max: usize,
    /// `(m, mu_RS(x^m, m T))`, twice the value.
    pub rs_sequence: Vec<(usize, i64)>,
    /// `(m, mu_CZ(x^(2m), 2 m T))`, twice the value.
    pub cz_sequence: Vec<(usize, i64)>,
    pub skipped: Vec<usize>,
    pub mean_rs: f64,
    pub mean_cz_double: f64,
    /// Last-iterate ratios as a second estimate.
    pub ratio_rs: f64,
    pub ratio_cz_double: f64,
    pub defect: f64,
}

/// Least-squares slope of `y` against `m`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return points.first().map_or(f64::NAN, |p| p.1 / p.0);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean index estimates from the iterates `m <= m_max`.
pub fn mean_indices(lin: &OrbitLinearization, m_max: usize) -> Result<MeanIndexReport> {
    if m_max < 8 {
        return Err(Error::InvalidParameter(format!("m_max must be at least 8 (got {m_max})")));
    }
    let rs: Vec<(usize, Result<IndexValue>)> = (1..=m_max).into_par_iter().map(|m| (m, lin.iterate_rs_index(m))).collect();
    let cz: Vec<(usize, Result<IndexValue>)> = (1..=m_max).into_par_iter().map(|m| (m, lin.iterate_cz_index(m))).collect();
    let mut report = MeanIndexReport {
        m_max,
        rs_sequence: vec![],
        cz_sequence: vec![],
        skipped: vec![],
        mean_rs: f64::NAN,
        mean_cz_double: f64::NAN,
        ratio_rs: f64::NAN,
        ratio_cz_double: f64::NAN,
        defect: f64::NAN,
    };
    for (m, r) in rs {
        match r {
            Ok(v) => report.rs_sequence.push((m, v.twice)),
            Err(Error::DegenerateCrossing { .. }) => report.skipped.push(m),
            Err(e) => return Err(e),
        }
    }
    for (m, r) in cz {
        match r {
            Ok(v) => report.cz_sequence.push((m, v.twice)),
            Err(Error::DegenerateEndpoint { .. } | Error::DegenerateCrossing { .. }) => {
                if !report.skipped.contains(&m) {
                    report.skipped.push(m);
                }
            }
            Err(e) => return Err(e),
        }
    }
    report.skipped.sort_unstable();
    let tail = |seq: &[(usize, i64)]| -> Vec<(f64, f64)> {
        seq.iter().filter(|(m, _)| 2 * m >= m_max).map(|&(m, v)| (m as f64, v as f64 / 2.0)).collect()
    };
    let rs_tail = tail(&report.rs_sequence);
    let cz_tail = tail(&report.cz_sequence);
    if rs_tail.len() < 2 || cz_tail.len() < 2 {
        return Err(Error::Numerical("too many degenerate iterates for a mean index estimate".into()));
    }
    report.mean_rs = slope(&rs_tail);
    report.mean_cz_double = slope(&cz_tail);
    let last = |seq: &[(usize, i64)]| seq.last().map_or(f64::NAN, |&(m, v)| v as f64 / 2.0 / m as f64);
    report.ratio_rs = last(&report.rs_sequence);
    report.ratio_cz_double = last(&report.cz_sequence);
    report.defect = (report.mean_rs - 0.5 * report.mean_cz_double).abs();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEntry {
    pub t: f64,
    pub sign: i32,
}

/// Index summary of one orbit, as exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub orbit_id: usize,
    pub mu_rs: f64,
    pub mu_rfh: f64,
    pub partner_mu_rs: f64,
    pub crossings: Vec<CrossingEntry>,
    pub mean_rs: Option<f64>,
    pub mean_cz_double: Option<f64>,
    pub defect: Option<f64>,
}

pub fn index_report(orbit_id: usize, lin: &OrbitLinearization, means: Option<&MeanIndexReport>) -> Result<IndexReport> {
    let mu = lin.rs_index()?;
    let partner = lin.partner_rs_index()?;
    Ok(IndexReport {
        orbit_id,
        mu_rs: mu.value(),
        mu_rfh: rfh_index(&mu).value(),
        partner_mu_rs: partner.value(),
        crossings: mu.crossings.iter().map(|c| CrossingEntry { t: c.t, sign: c.signature }).collect(),
        mean_rs: means.map(|m| m.mean_rs),
        mean_cz_double: means.map(|m| m.mean_cz_double),
        defect: means.map(|m| m.defect),
    })
}

/// Matrix of `T R` in the frame at a fixed-locus point.
pub fn involution_in_frame(surface: &RegularizedSurface, w: &SpherePhasePoint) -> Result<Matrix2<f64>> {
    let f = contact_frame(surface, w)?;
    let r = |u: &Vec6| moser::regularized_involution(&SpherePhasePoint::from_vec6(u)).to_vec6();
    let c1 = flow::frame_coordinates(&f, &r(&f.e1));
    let c2 = flow::frame_coordinates(&f, &r(&f.e2));
    Ok(Matrix2::new(c1[0], c2[0], c1[1], c2[1]))
}
