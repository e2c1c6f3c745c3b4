//! CSV and JSON exports of grids, circles, trajectories and reports.

use std::fmt::Write;

use serde_json::{json, Map, Value};

use crate::cover::ConvexityReport;
use crate::dynamics::{HillRegionGrid, ProblemKind};
use crate::flow::{Chart, Trajectory};
use crate::homology::{GradedRanks, RfhRank};
use crate::moser::{FixedLocusCircle, RegularizedSurface};
use crate::orbits::SymmetricOrbit;
use crate::Primary;

pub fn kind_name(kind: &ProblemKind) -> String {
    match kind {
        ProblemKind::Pcrtbp(_) => "pcrtbp".into(),
        ProblemKind::HillLunar => "hill".into(),
        ProblemKind::RotatingKepler => "rotating-kepler".into(),
    }
}

pub fn hill_grid_csv(grid: &HillRegionGrid) -> String {
    let mut out = String::from("q1,q2,U,inside,component\n");
    for cell in &grid.cells {
        let u = cell.potential.map_or("nan".to_string(), |u| format!("{u:.17e}"));
        let comp = cell.component.map_or("".to_string(), |c| c.to_string());
        writeln!(out, "{:.17e},{:.17e},{u},{},{comp}", cell.q[0], cell.q[1], cell.inside as u8).unwrap();
    }
    out
}

pub fn hill_grid_header(grid: &HillRegionGrid) -> Value {
    json!({
        "kind": kind_name(&grid.kind),
        "mu": grid.kind.mu(),
        "c": grid.energy,
        "nx": grid.spec.nx,
        "ny": grid.spec.ny,
        "q1_range": grid.spec.q1_range,
        "q2_range": grid.spec.q2_range,
        "components": grid.components,
        "two_bounded": grid.check_two_bounded(),
    })
}

pub fn circles_csv(circles: &[&FixedLocusCircle]) -> String {
    let mut out = String::from("sign,theta,f,xi0,xi2,q1_projected\n");
    for c in circles {
        for s in &c.samples {
            writeln!(out, "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", c.sign, s.theta, s.f, s.xi0, s.xi2, s.q1).unwrap();
        }
    }
    out
}

pub fn surface_metadata(surface: &RegularizedSurface) -> Value {
    json!({
        "kind": kind_name(&surface.kind),
        "mu": surface.kind.mu(),
        "c": surface.c,
        "primary": surface.primary,
        "level": surface.level,
    })
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let names: &[&str] = match traj.chart {
        Chart::Plane => &["q1", "q2", "p1", "p2"],
        Chart::Sphere => &["xi0", "xi1", "xi2", "eta0", "eta1", "eta2", "t_phys"],
    };
    let mut out = format!("t,{},energy_drift\n", names.join(","));
    for ((t, y), d) in traj.t.iter().zip(&traj.states).zip(&traj.energy_drift) {
        write!(out, "{t:.17e}").unwrap();
        for v in y.iter().take(names.len()) {
            write!(out, ",{v:.17e}").unwrap();
        }
        writeln!(out, ",{d:.17e}").unwrap();
    }
    out
}

pub fn trajectory_header(traj: &Trajectory) -> Value {
    json!({ "chart": traj.chart, "samples": traj.t.len(), "max_energy_drift": traj.max_energy_drift() })
}

pub fn orbit_json(orbit: &SymmetricOrbit) -> Value {
    let samples: Vec<Vec<f64>> = orbit
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![s.t_phys];
            row.extend_from_slice(&s.point.xi);
            row.extend_from_slice(&s.point.eta);
            row
        })
        .collect();
    json!({
        "kind": kind_name(&orbit.kind),
        "mu": orbit.kind.mu(),
        "c": orbit.c,
        "primary": orbit.primary,
        "circle_start": orbit.start_circle.to_string(),
        "circle_end": orbit.end_circle.to_string(),
        "theta0": orbit.theta0,
        "crossing": orbit.crossing,
        "half_period": orbit.half_period_physical,
        "half_period_regularized": orbit.half_period,
        "type": orbit.orbit_type.to_string(),
        "plane_type": orbit.plane_type.map(|t| t.to_string()),
        "residual": orbit.residual,
        "nondegeneracy": orbit.nondegeneracy,
        "samples": samples,
    })
}

pub fn convexity_json(kind: &ProblemKind, c: f64, primary: Option<Primary>, rep: &ConvexityReport) -> Value {
    json!({
        "kind": kind_name(kind),
        "mu": kind.mu(),
        "c": c,
        "primary": primary,
        "samples": rep.samples,
        "min_restricted_eigenvalue": rep.min_restricted_eigenvalue,
        "location": rep.location,
        "pass": rep.pass,
        "certified_negative": rep.certified_negative,
    })
}

/// `{degree: rank}` through `upto`, plus the tail marker.
pub fn ranks_json(g: &GradedRanks, upto: usize) -> Value {
    let mut m = Map::new();
    for (k, r) in g.ranks_up_to(upto).into_iter().enumerate() {
        m.insert(k.to_string(), json!(r));
    }
    m.insert("tail".into(), json!({ "from": g.stable_from(), "rank": g.tail() }));
    Value::Object(m)
}

pub fn rfh_json(table: &[(i64, RfhRank)]) -> Value {
    let mut m = Map::new();
    for (k, r) in table {
        let v = match r {
            RfhRank::Rank(n) => json!(n),
            RfhRank::NotComputed => json!("not computed"),
        };
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}
