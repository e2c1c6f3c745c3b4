use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use proptest::prelude::*;

use pcrtbp::dynamics::{PlanePhasePoint, ProblemKind};
use pcrtbp::index::{self, LagrangianLinePath, LagrangianPath};
use pcrtbp::moser::{self, RegularizedSurface};
use pcrtbp::ode::IntegratorConfig;
use pcrtbp::orbit_index::{self, OrbitLinearization};
use pcrtbp::orbits::{self, Circle, ScanConfig};
use pcrtbp::Primary;

/// Twice the index by angle winding: `w(phi) = (floor(phi/pi) + ceil(phi/pi)) / 2`.
fn winding_twice(theta0: f64, theta1: f64, theta_v: f64) -> i64 {
    let w = |p: f64| ((p - theta_v) / PI).floor() as i64 + ((p - theta_v) / PI).ceil() as i64;
    w(theta1) - w(theta0)
}

fn sampled(f: &impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize, theta_v: f64) -> LagrangianLinePath {
    let t: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
    let theta = t.iter().map(|&s| f(s)).collect();
    LagrangianLinePath { t, theta, theta_v }
}

fn curve(c: [f64; 5]) -> impl Fn(f64) -> f64 + Sync + Copy {
    move |t: f64| c[0] * t + c[1] * (3.0 * t + c[2]).sin() + c[3] * (7.0 * t).cos() + c[4]
}

fn rot(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn line_index_matches_winding(c in prop::array::uniform5(-4.0f64..4.0), tv in -3.0f64..3.0) {
        let f = curve(c);
        let path = sampled(&f, 0.0, 1.0, 400, tv);
        let v = index::rs_index_line(&path).unwrap();
        prop_assert_eq!(v.twice, winding_twice(f(0.0), f(1.0), tv));
        prop_assert_eq!(v.twice, v.from_records());
        // refinement
        let fine = index::rs_index_line(&sampled(&f, 0.0, 1.0, 800, tv)).unwrap();
        prop_assert_eq!(fine.twice, v.twice);
    }

    #[test]
    fn catenation(c in prop::array::uniform5(-4.0f64..4.0), tv in -3.0f64..3.0, split in 0.1f64..0.9) {
        let f = curve(c);
        let whole = index::rs_index_line(&sampled(&f, 0.0, 1.0, 500, tv)).unwrap();
        let a = index::rs_index_line(&sampled(&f, 0.0, split, 250, tv)).unwrap();
        let b = index::rs_index_line(&sampled(&f, split, 1.0, 250, tv)).unwrap();
        prop_assert_eq!(a.twice + b.twice, whole.twice);
    }

    #[test]
    fn general_matches_line(c in prop::array::uniform5(-4.0f64..4.0), tv in -3.0f64..3.0) {
        let f = curve(c);
        let frame = move |t: f64| DMatrix::from_column_slice(2, 1, &[f(t).cos(), f(t).sin()]);
        let path = LagrangianPath { frame: Box::new(frame), t0: 0.0, t1: 1.0, samples: 400 };
        let v = DMatrix::from_column_slice(2, 1, &[tv.cos(), tv.sin()]);
        let g = index::rs_index_general(&path, &v, &index::standard_j(1)).unwrap();
        prop_assert_eq!(g.twice, winding_twice(f(0.0), f(1.0), tv));
    }

    #[test]
    fn reflection_identity(c in prop::array::uniform5(-4.0f64..4.0)) {
        // R = diag(1, -1) sends the line at angle a to the line at -a and fixes V
        let f = curve(c);
        let g = move |t: f64| -f(1.0 - t);
        let a = index::rs_index_line(&sampled(&f, 0.0, 1.0, 400, 0.0)).unwrap();
        let b = index::rs_index_line(&sampled(&g, 0.0, 1.0, 400, 0.0)).unwrap();
        prop_assert_eq!(a.twice, b.twice);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn direct_sum_additivity(c1 in prop::array::uniform5(-3.0f64..3.0), c2 in prop::array::uniform5(-3.0f64..3.0),
                             v1 in -1.5f64..1.5, v2 in -1.5f64..1.5) {
        let (f, g) = (curve(c1), curve(c2));
        let frame = move |t: f64| {
            let mut m = DMatrix::zeros(4, 2);
            m[(0, 0)] = f(t).cos();
            m[(2, 0)] = f(t).sin();
            m[(1, 1)] = g(t).cos();
            m[(3, 1)] = g(t).sin();
            m
        };
        let mut v = DMatrix::zeros(4, 2);
        v[(0, 0)] = v1.cos();
        v[(2, 0)] = v1.sin();
        v[(1, 1)] = v2.cos();
        v[(3, 1)] = v2.sin();
        let path = LagrangianPath { frame: Box::new(frame), t0: 0.0, t1: 1.0, samples: 600 };
        let sum = index::rs_index_general(&path, &v, &index::standard_j(2)).unwrap();
        prop_assert_eq!(sum.twice, winding_twice(f(0.0), f(1.0), v1) + winding_twice(g(0.0), g(1.0), v2));
    }

    #[test]
    fn maslov_loop_adds_two(a in 0.2f64..2.0, b in -2.0f64..2.0, k in 1usize..3) {
        // hyperbolic generator, endpoint nondegenerate
        let gen = move |t: f64| {
            let m = DMatrix::from_row_slice(2, 2, &[a * t, b * t, b * t, -a * t]);
            m.exp()
        };
        let base = index::cz_index_fn(gen, 1.0, 400).unwrap();
        let looped = index::cz_index_fn(move |t| rot(2.0 * PI * k as f64 * t) * gen(t), 1.0, 1200).unwrap();
        prop_assert_eq!(looped.twice - base.twice, 4 * k as i64);
    }

    #[test]
    fn conjugation_fixing_v(c in prop::array::uniform5(-3.0f64..3.0), s in -3.0f64..3.0) {
        // A = [[1, s], [0, 1]] fixes V = R x 0 pointwise
        let f = curve(c);
        let a = Matrix2::new(1.0, s, 0.0, 1.0);
        let t: Vec<f64> = (0..=800).map(|i| i as f64 / 800.0).collect();
        let vecs: Vec<[f64; 2]> = t.iter().map(|&x| {
            let w = a * nalgebra::Vector2::new(f(x).cos(), f(x).sin());
            [w[0], w[1]]
        }).collect();
        let moved = index::rs_index_line(&LagrangianLinePath::from_vectors(t, &vecs, 0.0).unwrap()).unwrap();
        prop_assert_eq!(moved.twice, winding_twice(f(0.0), f(1.0), 0.0));
    }
}

#[test]
fn constant_transverse_path_has_index_zero() {
    let frame = |_t: f64| DMatrix::from_column_slice(4, 2, &[0.3, 0.1, 1.0, 0.2, 0.1, 0.4, 0.2, 1.0]);
    let path = LagrangianPath { frame: Box::new(frame), t0: 0.0, t1: 1.0, samples: 50 };
    let v = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    assert_eq!(index::rs_index_general(&path, &v, &index::standard_j(2)).unwrap().twice, 0);
}

fn rotation_model(rho: f64, half: f64, n: usize) -> OrbitLinearization {
    let s: Vec<f64> = (0..=2 * n).map(|i| 2.0 * half * i as f64 / (2 * n) as f64).collect();
    let psi = s.iter().map(|&t| Matrix2::new((rho * t).cos(), -(rho * t).sin(), (rho * t).sin(), (rho * t).cos())).collect();
    OrbitLinearization { half_period: half, s, psi, half_index: n, max_det_correction: 0.0 }
}

#[test]
fn rotation_model_mean_index() {
    for (rho, half) in [(1.3, PI), (0.7, 2.0), (2.9, 1.1)] {
        let lin = rotation_model(rho, half, 400);
        let rep = orbit_index::mean_indices(&lin, 8).unwrap();
        let want = rho * half / PI;
        assert!((rep.mean_rs - want).abs() < 0.15, "rho {rho}: {} vs {want}", rep.mean_rs);
        assert!(rep.defect < 0.3, "{rep:?}");
        for &(m, twice) in &rep.rs_sequence {
            assert_eq!(twice, winding_twice(0.0, rho * half * m as f64, 0.0));
        }
    }
}

/// Plane linearization of the circular orbit through `(r, 0, 0, p2)`: in coordinates
/// rotating with the orbit the variational equation has constant coefficients.
fn circular_orbit_index(r: f64, p2: f64) -> i64 {
    let (q1, q2, p1) = (r, 0.0, 0.0);
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    #[rustfmt::skip]
    let a0 = Matrix4::new(
        0.0, 1.0, 1.0, 0.0,
        -1.0, 0.0, 0.0, 1.0,
        -(1.0 / r3 - 3.0 * q1 * q1 / r5), 3.0 * q1 * q2 / r5, 0.0, 1.0,
        3.0 * q1 * q2 / r5, -(1.0 / r3 - 3.0 * q2 * q2 / r5), -1.0, 0.0,
    );
    let omega = (q1 * (p2 - q1) - q2 * (p1 + q2)) / (r * r);
    #[rustfmt::skip]
    let g = Matrix4::new(
        0.0, -1.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, -1.0,
        0.0, 0.0, 1.0, 0.0,
    );
    let b = a0 - g * omega;
    // pairing dp ^ dq on (q1, q2, p1, p2)
    let dl = |u: &Vector4<f64>, w: &Vector4<f64>| u[2] * w[0] + u[3] * w[1] - u[0] * w[2] - u[1] * w[3];
    // V: tangent to the fixed set (dq1, dp2) inside the level set; e2 vertical: dp = 0, dq orthogonal to H_q
    let h_q1 = q1 / r3 - p2;
    let h_p2 = p2 - q1;
    let v = Vector4::new(1.0, 0.0, 0.0, -h_q1 / h_p2);
    let e2 = Vector4::new(0.0, 1.0, 0.0, 0.0);
    let e1 = v / dl(&v, &e2);
    let half = PI / omega.abs();
    let n = 4000;
    let theta: Vec<f64> = {
        let mut out: Vec<f64> = vec![];
        for i in 0..=n {
            let t = half * i as f64 / n as f64;
            let w = (b * t).exp() * e1;
            let (x, y) = (dl(&w, &e2), dl(&e1, &w));
            let raw = y.atan2(x);
            let lifted = match out.last() {
                None => raw,
                Some(&p) => {
                    let mut d = (raw - p).rem_euclid(PI);
                    if d > PI / 2.0 {
                        d -= PI;
                    }
                    p + d
                }
            };
            out.push(lifted);
        }
        out
    };
    winding_twice(theta[0], theta[n], 0.0)
}

#[test]
fn kepler_retrograde_circular_orbit_index() {
    let kind = ProblemKind::RotatingKepler;
    let s = RegularizedSurface::new(kind, Primary::Earth, -1.5).unwrap();
    let z0 = PlanePhasePoint::new(0.25, 0.0, 0.0, -2.0);
    let w0 = moser::inverse_moser_map(z0, &kind, Primary::Earth).unwrap();
    let theta = w0.xi[2].atan2(w0.xi[0]);
    let scan = ScanConfig::default();
    let orbit = orbits::build_orbit(&s, Circle::of_sign(w0.eta[1]), theta, 1, &scan).unwrap();
    assert!(orbit.residual.abs() < 1e-8);
    assert!((orbit.half_period_physical - PI / 9.0).abs() < 1e-8);
    let mu = orbit_index::orbit_rs_index(&s, &orbit, &IntegratorConfig::default()).unwrap();
    assert_eq!(mu.twice, circular_orbit_index(0.25, -2.0));
}

#[test]
fn index_independent_of_vertical_preserving_frame() {
    let kind = ProblemKind::pcrtbp(0.01).unwrap();
    let c = pcrtbp::dynamics::lagrange_points(0.01).unwrap().l(1).energy - 0.01;
    let s = RegularizedSurface::new(kind, Primary::Moon, c).unwrap();
    let scan = ScanConfig { samples_per_circle: 90, crossings: vec![1], ..Default::default() };
    let rep = orbits::find_symmetric_orbits(&s, &scan).unwrap();
    assert!(!rep.orbits.is_empty());
    let cfg = IntegratorConfig::default();
    for o in &rep.orbits {
        let lin = orbit_index::linearize_orbit(&s, o, &cfg).unwrap();
        let mu = lin.rs_index().unwrap();
        assert_eq!(mu.twice.rem_euclid(2), 1);
        assert_eq!(lin.partner_rs_index().unwrap().twice, mu.twice);
        // e1 -> a e1 + g e2, e2 -> e2 / a with g vanishing on the fixed locus
        let other = orbit_index::linearize_orbit_with(&s, o, &cfg, |w| {
            let f = orbit_index::contact_frame(&s, w)?;
            let a = (0.3 * w.xi[0] + 0.2 * w.eta[1].tanh()).exp();
            let g = 0.8 * w.xi[1] + 0.5 * w.eta[0].tanh();
            Ok(pcrtbp::flow::ContactPlaneFrame { e1: f.e1 * a + f.e2 * g, e2: f.e2 / a })
        })
        .unwrap();
        assert_eq!(other.rs_index().unwrap().twice, mu.twice);
    }
}
