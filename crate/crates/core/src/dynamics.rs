//! Rotating-frame Hamiltonians on T*R^2.
//!
//! Three problems share one phase space: the planar circular restricted
//! three-body problem (PCRTBP), its mu = 0 limit (rotating Kepler), and
//! Hill's lunar problem. The earth sits at `(mu, 0)` and the moon at
//! `(-(1 - mu), 0)`; the rotating term is `q2 p1 - q1 p2`.
//!
//! Also here: the reflection symmetries, Lagrange points and Hill's regions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Primary, Result};
use crate::roots;

/// Normalized mass of the moon, `0 < mu < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MassRatio(f64);

impl MassRatio {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu > 0.0 && mu < 1.0 {
            Ok(Self(mu))
        } else {
            Err(Error::InvalidParameter(format!("mass ratio must lie in (0, 1), got {mu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProblemKind {
    Pcrtbp(MassRatio),
    HillLunar,
    /// The mu = 0 limit: Kepler problem about the origin seen from a rotating frame.
    RotatingKepler,
}

impl ProblemKind {
    pub fn pcrtbp(mu: f64) -> Result<Self> {
        Ok(Self::Pcrtbp(MassRatio::new(mu)?))
    }

    /// Mass ratio; zero for rotating Kepler. Hill's problem has no mass ratio.
    pub fn mu(&self) -> f64 {
        match self {
            Self::Pcrtbp(m) => m.value(),
            Self::HillLunar | Self::RotatingKepler => 0.0,
        }
    }

    pub fn earth_position(&self) -> [f64; 2] {
        match self {
            Self::HillLunar => [0.0, 0.0],
            _ => [self.mu(), 0.0],
        }
    }

    pub fn moon_position(&self) -> [f64; 2] {
        match self {
            Self::HillLunar => [0.0, 0.0],
            _ => [-(1.0 - self.mu()), 0.0],
        }
    }

    pub fn primary_position(&self, p: Primary) -> [f64; 2] {
        match p {
            Primary::Earth => self.earth_position(),
            Primary::Moon => self.moon_position(),
        }
    }

    /// Attracting bodies as `(mass, position, label)`; massless bodies are omitted.
    pub(crate) fn attractors(&self) -> Vec<(f64, [f64; 2], Primary)> {
        match self {
            Self::Pcrtbp(m) => {
                vec![(1.0 - m.value(), self.earth_position(), Primary::Earth), (m.value(), self.moon_position(), Primary::Moon)]
            }
            Self::RotatingKepler => vec![(1.0, [0.0, 0.0], Primary::Earth)],
            Self::HillLunar => vec![(1.0, [0.0, 0.0], Primary::Moon)],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Pcrtbp(_) => "pcrtbp",
            Self::HillLunar => "hill",
            Self::RotatingKepler => "rotating-kepler",
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Pcrtbp(m) => write!(f, "pcrtbp(mu={})", m.value()),
            _ => write!(f, "{}", self.name()),
        }
    }
}

/// A point `(q1, q2, p1, p2)` of T*R^2 in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePhasePoint {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PlanePhasePoint {
    pub const fn new(q1: f64, q2: f64, p1: f64, p2: f64) -> Self {
        Self { q1, q2, p1, p2 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    pub fn position(self) -> [f64; 2] {
        [self.q1, self.q2]
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

fn check_collision(kind: &ProblemKind, q: [f64; 2]) -> Result<()> {
    for (_, c, label) in kind.attractors() {
        if q[0] == c[0] && q[1] == c[1] {
            return Err(match kind {
                ProblemKind::HillLunar => Error::HillCollision,
                _ => Error::Collision(label),
            });
        }
    }
    Ok(())
}

/// Effective potential `U(q)` with `H = 1/2 |p + (q2, -q1)|^2 + U(q)`.
pub fn effective_potential(kind: &ProblemKind, q: [f64; 2]) -> Result<f64> {
    check_collision(kind, q)?;
    let mut u = -0.5 * (q[0] * q[0] + q[1] * q[1]);
    for (m, c, _) in kind.attractors() {
        u -= m / (q[0] - c[0]).hypot(q[1] - c[1]);
    }
    if matches!(kind, ProblemKind::HillLunar) {
        u += -q[0] * q[0] + 0.5 * q[1] * q[1];
    }
    Ok(u)
}

/// Gradient of the effective potential.
pub fn effective_potential_gradient(kind: &ProblemKind, q: [f64; 2]) -> Result<[f64; 2]> {
    check_collision(kind, q)?;
    let mut g = [-q[0], -q[1]];
    for (m, c, _) in kind.attractors() {
        let (dx, dy) = (q[0] - c[0], q[1] - c[1]);
        let r3 = dx.hypot(dy).powi(3);
        g[0] += m * dx / r3;
        g[1] += m * dy / r3;
    }
    if matches!(kind, ProblemKind::HillLunar) {
        g[0] += -2.0 * q[0];
        g[1] += q[1];
    }
    Ok(g)
}

pub fn hamiltonian(kind: &ProblemKind, z: PlanePhasePoint) -> Result<f64> {
    let PlanePhasePoint { q1, q2, p1, p2 } = z;
    check_collision(kind, [q1, q2])?;
    let mut h = 0.5 * (p1 * p1 + p2 * p2) + q2 * p1 - q1 * p2;
    for (m, c, _) in kind.attractors() {
        h -= m / (q1 - c[0]).hypot(q2 - c[1]);
    }
    if matches!(kind, ProblemKind::HillLunar) {
        h += -q1 * q1 + 0.5 * q2 * q2;
    }
    Ok(h)
}

/// `X_H = (dH/dp, -dH/dq)`, the field with `i_X (dq ^ dp) = dH`.
pub fn hamiltonian_vector_field(kind: &ProblemKind, z: PlanePhasePoint) -> Result<[f64; 4]> {
    let PlanePhasePoint { q1, q2, p1, p2 } = z;
    let g = effective_potential_gradient(kind, [q1, q2])?;
    // H = 1/2 |p|^2 + q2 p1 - q1 p2 + V(q) with V = U + 1/2 |q|^2.
    let dv_dq1 = g[0] + q1;
    let dv_dq2 = g[1] + q2;
    Ok([p1 + q2, p2 - q1, p2 - dv_dq1, -p1 - dv_dq2])
}

/// Jacobian of [`hamiltonian_vector_field`] with respect to `(q1, q2, p1, p2)`.
pub fn vector_field_jacobian(kind: &ProblemKind, z: PlanePhasePoint) -> Result<[[f64; 4]; 4]> {
    let PlanePhasePoint { q1, q2, .. } = z;
    check_collision(kind, [q1, q2])?;
    // Hessian of V = -sum m/r (+ Hill terms).
    let (mut vxx, mut vxy, mut vyy) = (0.0, 0.0, 0.0);
    for (m, c, _) in kind.attractors() {
        let (dx, dy) = (q1 - c[0], q2 - c[1]);
        let r2 = dx * dx + dy * dy;
        let r = r2.sqrt();
        let r3 = r2 * r;
        let r5 = r3 * r2;
        vxx += m * (1.0 / r3 - 3.0 * dx * dx / r5);
        vxy += m * (-3.0 * dx * dy / r5);
        vyy += m * (1.0 / r3 - 3.0 * dy * dy / r5);
    }
    if matches!(kind, ProblemKind::HillLunar) {
        vxx += -2.0;
        vyy += 1.0;
    }
    Ok([[0.0, 1.0, 1.0, 0.0], [-1.0, 0.0, 0.0, 1.0], [-vxx, -vxy, 0.0, 1.0], [-vxy, -vyy, -1.0, 0.0]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Involution {
    /// `(q1, q2, p1, p2) -> (q1, -q2, -p1, p2)`, reflection in the line of primaries.
    R,
    /// `(q1, q2, p1, p2) -> (-q1, q2, p1, -p2)`, only a symmetry of Hill's problem.
    RPrime,
}

pub fn involution(kind: &ProblemKind, which: Involution, z: PlanePhasePoint) -> Result<PlanePhasePoint> {
    match which {
        Involution::R => Ok(apply_r(z)),
        Involution::RPrime => {
            if !matches!(kind, ProblemKind::HillLunar) {
                return Err(Error::UnsupportedInvolution("R'"));
            }
            Ok(PlanePhasePoint::new(-z.q1, z.q2, z.p1, -z.p2))
        }
    }
}

pub fn apply_r(z: PlanePhasePoint) -> PlanePhasePoint {
    PlanePhasePoint::new(z.q1, -z.q2, -z.p1, z.p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangePoint {
    pub label: &'static str,
    pub position: [f64; 2],
    pub energy: f64,
}

/// The five equilibria L1..L5 with their energies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagrangePointSet {
    pub mu: f64,
    pub points: [LagrangePoint; 5],
}

impl LagrangePointSet {
    pub fn l(&self, i: usize) -> &LagrangePoint {
        &self.points[i - 1]
    }

    pub fn energies(&self) -> [f64; 5] {
        self.points.map(|p| p.energy)
    }

    /// `H(L1) < H(L2) <= H(L3) < H(L4) = H(L5)` with `tol` on the equalities.
    pub fn ordering_holds(&self, tol: f64) -> bool {
        let e = self.energies();
        e[0] < e[1] && e[1] <= e[2] + tol && e[2] < e[3] && (e[3] - e[4]).abs() <= tol
    }
}

/// d/dx of the effective potential along the q1-axis, and its derivative.
fn collinear_equation(mu: f64, x: f64) -> (f64, f64) {
    let (xe, xm) = (mu, -(1.0 - mu));
    let (de, dm) = (x - xe, x - xm);
    let f = -x + (1.0 - mu) * de / de.abs().powi(3) + mu * dm / dm.abs().powi(3);
    let df = -1.0 - 2.0 * (1.0 - mu) / de.abs().powi(3) - 2.0 * mu / dm.abs().powi(3);
    (f, df)
}

pub fn lagrange_points(mu: f64) -> Result<LagrangePointSet> {
    let m = MassRatio::new(mu)?;
    let kind = ProblemKind::Pcrtbp(m);
    let (xe, xm) = (mu, -(1.0 - mu));
    let eps = 1e-9;
    let far = 3.0;
    let solve = |lo: f64, hi: f64| -> Result<f64> {
        let f = |x: f64| collinear_equation(mu, x);
        let root = roots::bisect(|x| f(x).0, lo, hi, 1e-14, 200).map_err(|_| Error::Bracketing {
            lo,
            hi,
            context: format!("collinear equilibrium for mu = {mu}"),
        })?;
        // Newton polish, guarded to stay in the bracket.
        let mut x = root;
        for _ in 0..4 {
            let (v, dv) = f(x);
            let next = x - v / dv;
            if !(next > lo && next < hi) {
                break;
            }
            x = next;
        }
        Ok(x)
    };
    let inner = solve(xm + eps, xe - eps)?;
    let moon_side = solve(-far, xm - eps)?;
    let earth_side = solve(xe + eps, far)?;

    let energy = |q: [f64; 2]| effective_potential(&kind, q);
    let l1 = LagrangePoint { label: "L1", position: [inner, 0.0], energy: energy([inner, 0.0])? };
    let a = LagrangePoint { label: "L2", position: [moon_side, 0.0], energy: energy([moon_side, 0.0])? };
    let b = LagrangePoint { label: "L2", position: [earth_side, 0.0], energy: energy([earth_side, 0.0])? };
    // L2 is the lower of the two outer points; ties go to the moon side.
    let (mut l2, mut l3) = if b.energy < a.energy { (b, a) } else { (a, b) };
    l2.label = "L2";
    l3.label = "L3";

    let apex = [mu - 0.5, 3f64.sqrt() / 2.0];
    let l4 = LagrangePoint { label: "L4", position: apex, energy: energy(apex)? };
    let low = [apex[0], -apex[1]];
    let l5 = LagrangePoint { label: "L5", position: low, energy: energy(low)? };
    Ok(LagrangePointSet { mu, points: [l1, l2, l3, l4, l5] })
}

/// First critical energy of Hill's problem: `-(3/2) 3^(1/3)`, at `|q1| = 3^(-1/3)`.
pub fn hill_critical_energy() -> f64 {
    -1.5 * 3f64.cbrt()
}

/// First critical energy for any kind (rotating Kepler: the circle `|q| = 1` at -3/2).
pub fn first_critical_energy(kind: &ProblemKind) -> Result<f64> {
    match kind {
        ProblemKind::Pcrtbp(m) => Ok(lagrange_points(m.value())?.l(1).energy),
        ProblemKind::HillLunar => Ok(hill_critical_energy()),
        ProblemKind::RotatingKepler => Ok(-1.5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub q1_range: [f64; 2],
    pub q2_range: [f64; 2],
}

impl Default for GridSpec {
    /// 512 x 512 over a window of half-width 1.5 (primary separation is 1).
    fn default() -> Self {
        Self { nx: 512, ny: 512, q1_range: [-1.5, 1.5], q2_range: [-1.5, 1.5] }
    }
}

impl GridSpec {
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let dx = (self.q1_range[1] - self.q1_range[0]) / self.nx as f64;
        let dy = (self.q2_range[1] - self.q2_range[0]) / self.ny as f64;
        [self.q1_range[0] + (i as f64 + 0.5) * dx, self.q2_range[0] + (j as f64 + 0.5) * dy]
    }

    fn cell_index_of(&self, q: [f64; 2]) -> Option<(usize, usize)> {
        let fx = (q[0] - self.q1_range[0]) / (self.q1_range[1] - self.q1_range[0]);
        let fy = (q[1] - self.q2_range[0]) / (self.q2_range[1] - self.q2_range[0]);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * self.nx as f64) as usize, (fy * self.ny as f64) as usize))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    NearEarth,
    NearMoon,
    Unbounded,
    /// Bounded, containing no primary.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub q: [f64; 2],
    /// `None` for cells containing a singular primary.
    pub potential: Option<f64>,
    pub inside: bool,
    pub component: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentInfo {
    pub id: usize,
    pub kind: ComponentKind,
    pub cells: usize,
}

/// Hill's region `{U <= c}` sampled on a grid, row-major in `q2`.
#[derive(Debug, Clone, Serialize)]
pub struct HillRegionGrid {
    pub kind: ProblemKind,
    pub energy: f64,
    pub spec: GridSpec,
    pub cells: Vec<GridCell>,
    pub components: Vec<ComponentInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentCheck {
    pub holds: bool,
    pub bounded: usize,
    pub bounded_with_primary: usize,
}

impl HillRegionGrid {
    pub fn cell(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[j * self.spec.nx + i]
    }

    pub fn bounded_components(&self) -> impl Iterator<Item = &ComponentInfo> {
        self.components.iter().filter(|c| c.kind != ComponentKind::Unbounded)
    }

    /// Reports the actual counts rather than failing when the energy is above L1.
    pub fn check_two_bounded(&self) -> ComponentCheck {
        let bounded = self.bounded_components().count();
        let with_primary =
            self.bounded_components().filter(|c| matches!(c.kind, ComponentKind::NearEarth | ComponentKind::NearMoon)).count();
        ComponentCheck { holds: bounded == 2 && with_primary == 2, bounded, bounded_with_primary: with_primary }
    }

    pub fn component_of(&self, q: [f64; 2]) -> Option<usize> {
        let (i, j) = self.spec.cell_index_of(q)?;
        self.cell(i, j).component
    }
}

pub fn hill_region(kind: &ProblemKind, c: f64, spec: GridSpec) -> Result<HillRegionGrid> {
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let (nx, ny) = (spec.nx, spec.ny);
    let half_diag = 0.5 * ((spec.q1_range[1] - spec.q1_range[0]) / nx as f64).hypot((spec.q2_range[1] - spec.q2_range[0]) / ny as f64);
    let attractors = kind.attractors();
    let mut cells: Vec<GridCell> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let q = spec.cell_center(k % nx, k / nx);
            let singular = attractors.iter().any(|(_, p, _)| (q[0] - p[0]).hypot(q[1] - p[1]) < half_diag);
            if singular {
                GridCell { q, potential: None, inside: true, component: None }
            } else {
                let u = effective_potential(kind, q).unwrap_or(f64::NEG_INFINITY);
                GridCell { q, potential: Some(u), inside: u <= c, component: None }
            }
        })
        .collect();

    // 4-connected flood fill over inside cells.
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..cells.len() {
        if !cells[start].inside || cells[start].component.is_some() {
            continue;
        }
        let id = components.len();
        let mut count = 0;
        let mut touches_border = false;
        cells[start].component = Some(id);
        stack.push(start);
        while let Some(k) = stack.pop() {
            count += 1;
            let (i, j) = (k % nx, k / nx);
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                touches_border = true;
            }
            let mut visit = |ii: usize, jj: usize| {
                let n = jj * nx + ii;
                if cells[n].inside && cells[n].component.is_none() {
                    cells[n].component = Some(id);
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < nx {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < ny {
                visit(i, j + 1);
            }
        }
        components.push(ComponentInfo {
            id,
            kind: if touches_border { ComponentKind::Unbounded } else { ComponentKind::Other },
            cells: count,
        });
    }
    for (_, p, label) in &attractors {
        if let Some((i, j)) = spec.cell_index_of(*p) {
            if let Some(id) = cells[j * nx + i].component {
                if components[id].kind == ComponentKind::Other {
                    components[id].kind = match label {
                        Primary::Earth => ComponentKind::NearEarth,
                        Primary::Moon => ComponentKind::NearMoon,
                    };
                }
            }
        }
    }
    Ok(HillRegionGrid { kind: *kind, energy: c, spec, cells, components })
}
