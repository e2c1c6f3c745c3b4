use proptest::prelude::*;

use pcrtbp::cover::{self, CoverSurface, DefiningFunction, Point4};
use pcrtbp::dynamics::{self, lagrange_points, PlanePhasePoint, ProblemKind};
use pcrtbp::moser::{self, SpherePhasePoint};
use pcrtbp::ode::IntegratorConfig;
use pcrtbp::orbits::{self, OrbitType, ScanConfig};
use pcrtbp::Primary;

fn pcrtbp_cover(mu: f64, primary: Primary, dc: f64) -> CoverSurface {
    let c = lagrange_points(mu).unwrap().l(1).energy - dc;
    CoverSurface::new(ProblemKind::pcrtbp(mu).unwrap(), primary, c).unwrap()
}

fn dist(a: &SpherePhasePoint, b: &SpherePhasePoint) -> f64 {
    (a.to_vec6() - b.to_vec6()).norm()
}

fn point4() -> impl Strategy<Value = Point4> {
    prop::array::uniform4(-1.5f64..1.5).prop_filter("away from u = 0", |z| z[2].hypot(z[3]) > 0.05)
}

proptest! {
    // Oracle: with q - q_P = u^2 (complex square) and p = v / (2 conj u),
    // the defining function equals |u|^2 (H(q, p) - c).
    #[test]
    fn defining_function_is_scaled_energy(z in point4()) {
        let cov = pcrtbp_cover(0.1, Primary::Moon, 0.2);
        let (u, v) = ((z[2], z[3]), (z[0], z[1]));
        let qp = ProblemKind::pcrtbp(0.1).unwrap().primary_position(Primary::Moon);
        let q = [qp[0] + u.0 * u.0 - u.1 * u.1, qp[1] + 2.0 * u.0 * u.1];
        let n = u.0 * u.0 + u.1 * u.1;
        // v / (2 conj u) = v u / (2 |u|^2)
        let p = [(v.0 * u.0 - v.1 * u.1) / (2.0 * n), (v.0 * u.1 + v.1 * u.0) / (2.0 * n)];
        let x = PlanePhasePoint::from_array([q[0], q[1], p[0], p[1]]);
        let kind = ProblemKind::pcrtbp(0.1).unwrap();
        if let Ok(h) = dynamics::hamiltonian(&kind, x) {
            let expect = n * (h - cov.c());
            prop_assert!((cov.value(&z) - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn projection_is_even_and_matches_moser_route(z in point4()) {
        let cov = pcrtbp_cover(0.1, Primary::Earth, 0.2);
        let w = cov.project(&z);
        prop_assert!(dist(&w, &cov.project(&z.map(|v| -v))) < 1e-12);
        prop_assert!(w.constraint_drift() < 1e-12);
        let kind = ProblemKind::pcrtbp(0.1).unwrap();
        let x = cov.to_plane(&z).unwrap();
        let w2 = moser::inverse_moser_map(x, &kind, Primary::Earth).unwrap();
        prop_assert!(dist(&w, &w2) < 1e-9 * (1.0 + w2.to_vec6().norm()));
    }

    #[test]
    fn involution_descends(z in point4()) {
        let cov = pcrtbp_cover(0.01, Primary::Moon, 0.2);
        let lhs = cov.project(&CoverSurface::involution(&z));
        let rhs = moser::regularized_involution(&cov.project(&z));
        prop_assert!(dist(&lhs, &rhs) < 1e-12);
    }
}

#[test]
fn contract_holds_for_both_primaries() {
    let cfg = IntegratorConfig::default();
    for (mu, primary) in [(0.1, Primary::Moon), (0.1, Primary::Earth), (0.01, Primary::Moon)] {
        let c = lagrange_points(mu).unwrap().l(1).energy - 0.2;
        let (_, rep) = cover::levi_civita_cover(ProblemKind::pcrtbp(mu).unwrap(), primary, c, 300, 11, &cfg).unwrap();
        assert!(rep.central_symmetry_error <= 1e-9, "{rep:?}");
        assert!(rep.reeb_deviation <= 1e-6, "{rep:?}");
    }
}

#[test]
fn every_point_has_two_antipodal_preimages() {
    let cov = pcrtbp_cover(0.1, Primary::Moon, 0.2);
    let xi = [0.6, 0.0, 0.8];
    let u = [-0.8, 0.0, 0.6];
    let t = cov.surface.fiber_root_along(xi, u).unwrap();
    let w = SpherePhasePoint::new(xi, u.map(|v| v * t));
    let [a, b] = cov.preimages(&w).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x + y).abs() < 1e-14));
    assert!(a.iter().any(|v| v.abs() > 1e-3));
    for z in [a, b] {
        assert!(dist(&cov.project(&z), &w) < 1e-10);
    }
    // the fiber over the collision point: u = 0
    let w = SpherePhasePoint::new([1.0, 0.0, 0.0], [0.0, 0.3, -0.4]);
    let [a, _] = cov.preimages(&w).unwrap();
    assert_eq!((a[2], a[3]), (0.0, 0.0));
    assert!(dist(&cov.project(&a), &w) < 1e-12);
}

#[test]
fn reeb_flow_projects_onto_kepler_circular_orbit() {
    // retrograde circular Kepler orbit of radius 1/4, energy -3/2 (physical period 2 pi / 9)
    let kind = ProblemKind::RotatingKepler;
    let cov = CoverSurface::new(kind, Primary::Earth, -1.5).unwrap();
    let x = PlanePhasePoint::from_array([0.25, 0.0, 0.0, -2.0]);
    let w = moser::inverse_moser_map(x, &kind, Primary::Earth).unwrap();
    let [z0, _] = cov.preimages(&w).unwrap();
    assert!(cov.value(&z0).abs() < 1e-12);
    let dev = cover::reeb_projection_deviation(&cov, &z0, 1.0, 6, &IntegratorConfig::default()).unwrap();
    assert!(dev < 1e-7, "{dev}");
}

#[test]
fn lift_type_matches_orbit_type() {
    let cfg = IntegratorConfig::default();
    let check = |kind: ProblemKind, primary: Primary, c: f64, crossings: Vec<usize>| {
        let s = moser::RegularizedSurface::new(kind, primary, c).unwrap();
        let scan = ScanConfig { samples_per_circle: 120, crossings, ..Default::default() };
        let rep = orbits::find_symmetric_orbits(&s, &scan).unwrap();
        let cov = CoverSurface::new(kind, primary, c).unwrap();
        let mut types = vec![];
        for o in &rep.orbits {
            let l0 = cover::lift_orbit(&cov, o, 0).unwrap();
            let l1 = cover::lift_orbit(&cov, o, 1).unwrap();
            assert_eq!(l0.centrally_symmetric, o.orbit_type == OrbitType::I, "{:?}", o.orbit_type);
            assert_eq!(l0.centrally_symmetric, l1.centrally_symmetric);
            let period = if l0.centrally_symmetric { 2.0 } else { 1.0 } * o.doubled().period_physical;
            assert!((l0.period_physical - period).abs() < 1e-12);
            // the closed lift returns to its start within the Reeb flow
            let traj = cover::integrate_reeb_to_time(&cov, &l0.start, l0.period_physical, 1e4, false, &cfg).unwrap();
            let gap = traj.end().iter().zip(&l0.start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-6, "{gap}");
            types.push(o.orbit_type);
        }
        types
    };
    let t = check(ProblemKind::pcrtbp(0.01).unwrap(), Primary::Moon, lagrange_points(0.01).unwrap().l(1).energy - 0.2, vec![1]);
    assert!(t.contains(&OrbitType::I));
    let t = check(ProblemKind::RotatingKepler, Primary::Earth, -1.6, vec![2]);
    assert!(t.contains(&OrbitType::II));
}

#[test]
fn spot_check_indices_are_at_least_three() {
    let cov = pcrtbp_cover(0.01, Primary::Moon, 0.2);
    let scan = ScanConfig { samples_per_circle: 90, crossings: vec![1], ..Default::default() };
    let rep = orbits::find_symmetric_orbits(&cov.surface, &scan).unwrap();
    let spot = cover::dynamical_convexity_spot_check(&cov, &rep.orbits, &IntegratorConfig::default()).unwrap();
    assert!(!spot.entries.is_empty());
    for e in &spot.entries {
        assert!(e.closing_error < 1e-8, "{e:?}");
        assert!(e.cz.is_integer());
    }
    assert!(spot.min_cz.unwrap() >= 3.0);
}

#[test]
fn convexity_below_first_critical_value() {
    let cov = pcrtbp_cover(0.01, Primary::Moon, 0.2);
    let rep = cover::strict_convexity_check(&cov, 1000, 3).unwrap();
    assert!(rep.pass, "{rep:?}");
}
