use std::f64::consts::PI;

use pcrtbp::cover::{integrate_reeb, reeb_orbit_cz, strict_convexity_check, DefiningFunction};
use pcrtbp::ellipsoid::{pullback_defect, Census, Ellipsoid, QuarticSurface};
use pcrtbp::ode::IntegratorConfig;

fn cfg() -> IntegratorConfig {
    IntegratorConfig { abs_tol: 1e-12, rel_tol: 1e-12, ..IntegratorConfig::default() }
}

// Oracle: the linearized flow along the k-fold z1-axis orbit rotates the
// transverse plane by the angle k * 2 pi (1 + r1 / r2), and a nondegenerate
// rotation by phi has index 2 floor(phi / 2 pi) + 1.
fn rotation_oracle(turns: f64) -> i64 {
    2 * turns.floor() as i64 + 1
}

#[test]
fn reeb_flow_matches_closed_form() {
    let e = Ellipsoid::new(1.0, 2f64.sqrt()).unwrap();
    let z0 = e.flow([0.6, 0.2], [0.0, 0.0], 0.0);
    let a2 = ((1.0 - (0.6f64.powi(2) + 0.2f64.powi(2))) * e.r2).sqrt();
    let z0 = [z0[0], a2, z0[2], 0.0];
    assert!(e.value(&z0).abs() < 1e-14);
    let traj = integrate_reeb(&e, &z0, 2.5, false, &cfg()).unwrap();
    let exact = e.flow([0.6, 0.2], [a2, 0.0], 2.5);
    let end = traj.end();
    let err = (0..4).map(|k| (end[k] - exact[k]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn axis_orbits_close_with_action_periods() {
    let e = Ellipsoid::new(1.0, 1.7).unwrap();
    for (z0, t) in [e.short_orbit(), e.long_orbit()] {
        let end = integrate_reeb(&e, &z0, t, false, &cfg()).unwrap().end();
        let err = (0..4).map(|k| (end[k] - z0[k]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }
}

#[test]
fn axis_orbit_indices_match_rotation_oracle() {
    for (r1, r2) in [(1.0, 2f64.sqrt()), (1.0, 1.3), (0.5, 1.6)] {
        let e = Ellipsoid::new(r1, r2).unwrap();
        let (zs, ts) = e.short_orbit();
        let (zl, tl) = e.long_orbit();
        for k in 1..=2 {
            let cz = reeb_orbit_cz(&e, &zs, k as f64 * ts, &cfg()).unwrap();
            assert_eq!(cz.twice, 2 * rotation_oracle(k as f64 * (1.0 + r1 / r2)), "short k={k} {r1} {r2}");
            let cz = reeb_orbit_cz(&e, &zl, k as f64 * tl, &cfg()).unwrap();
            assert_eq!(cz.twice, 2 * rotation_oracle(k as f64 * (1.0 + r2 / r1)), "long k={k} {r1} {r2}");
        }
    }
}

#[test]
fn round_sphere_orbit_is_degenerate() {
    let e = Ellipsoid::sphere();
    let (z0, t) = e.short_orbit();
    assert!(reeb_orbit_cz(&e, &z0, t, &cfg()).is_err());
    assert!(matches!(e.census(), Census::AllPeriodic { p: 1, q: 1, .. }));
}

#[test]
fn census_periods() {
    let e = Ellipsoid::new(2.0, 3.0).unwrap();
    match e.census() {
        Census::AllPeriodic { p, q, period } => {
            assert_eq!((p, q), (2, 3));
            assert!((period - 6.0 * PI).abs() < 1e-12);
        }
        c => panic!("{c:?}"),
    }
    let e = Ellipsoid::new(1.0, PI).unwrap();
    match e.census() {
        Census::TwoOrbits { short_period, long_period } => {
            assert!((short_period - PI).abs() < 1e-15 && (long_period - PI * PI).abs() < 1e-14);
        }
        c => panic!("{c:?}"),
    }
}

#[test]
fn convexity_checker_separates_examples() {
    let e = Ellipsoid::new(1.0, 2.5).unwrap();
    let rep = strict_convexity_check(&e, 2000, 7).unwrap();
    assert!(rep.pass);
    // normalized curvature of an ellipsoid is at least sqrt(r1) / r2
    assert!(rep.min_restricted_eigenvalue >= 1.0 / 2.5 - 1e-9);

    let q = QuarticSurface::new(0.6).unwrap();
    let rep = strict_convexity_check(&q, 2000, 7).unwrap();
    assert!(!rep.pass && rep.certified_negative, "{rep:?}");
}

#[test]
fn brake_map_preserves_liouville_form() {
    let pts = [[0.3, -1.2, 0.7, 2.1], [1.0, 0.0, 0.0, 0.0], [-0.4, 0.5, 0.25, -0.9]];
    for z in &pts {
        for w in &pts {
            assert!(pullback_defect(z, w) < 1e-15);
        }
    }
}
