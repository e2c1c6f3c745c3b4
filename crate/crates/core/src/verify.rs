//! End-to-end checks against closed-form and brute-force oracles. Each check
//! reports pass/fail with its pinned tolerance; `run_all` drives the full list.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{self, lagrange_points, Involution, PlanePhasePoint, ProblemKind};
use crate::flow;
use crate::moser::{self, RegularizedSurface, SpherePhasePoint};
use crate::ode::IntegratorConfig;
use crate::orbits::{self, ScanConfig, SymmetricOrbit};
use crate::{Primary, Result};

/// Checks implemented as stated that fail on this implementation.
/// 6: the analytic Kepler orbits meet both fixed circles exactly when k + l is
///    odd, the opposite of the parity rule being checked.
pub const KNOWN_FAILURES: &[u32] = &[6];

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {:<28} {} ({:.2} s)", self.id, self.name, self.detail, self.seconds)
    }
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome { id, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

fn l1_energy(mu: f64) -> f64 {
    lagrange_points(mu).expect("valid mass ratio").l(1).energy
}

pub fn lagrange_ordering() -> Outcome {
    timed(1, "lagrange ordering", || {
        let mut worst_gap = 0.0f64;
        let mut ok = true;
        for mu in [0.01, 0.1, 0.3] {
            let e = lagrange_points(mu)?.energies();
            ok &= e[0] < e[1] && e[1] <= e[2] && e[2] < e[3];
            worst_gap = worst_gap.max((e[3] - e[4]).abs());
        }
        ok &= worst_gap <= 1e-12;
        Ok((ok, format!("strict order for mu in {{0.01, 0.1, 0.3}}, |H(L4) - H(L5)| = {worst_gap:.1e} <= 1e-12")))
    })
}

fn random_plane(rng: &mut ChaCha8Rng) -> PlanePhasePoint {
    PlanePhasePoint::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
}

fn random_cotangent(rng: &mut ChaCha8Rng) -> SpherePhasePoint {
    let mut xi: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let n = moser::dot3(xi, xi).sqrt();
    xi = xi.map(|v| v / n);
    let e: [f64; 3] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
    let d = moser::dot3(e, xi);
    SpherePhasePoint::new(xi, [e[0] - d * xi[0], e[1] - d * xi[1], e[2] - d * xi[2]])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn symmetry_suite(samples: usize, seed: u64) -> Outcome {
    timed(2, "symmetry suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pc = ProblemKind::pcrtbp(0.1)?;
        let hill = ProblemKind::HillLunar;
        let surface = RegularizedSurface::new(pc, Primary::Moon, l1_energy(0.1) - 0.2)?;
        let (mut e_h, mut e_hill, mut e_q, mut e_m) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut n = 0;
        while n < samples {
            let z = random_plane(&mut rng);
            let w = random_cotangent(&mut rng);
            let (Ok(h), Ok(hr), Ok(g), Ok(gr)) = (
                dynamics::hamiltonian(&pc, z),
                dynamics::hamiltonian(&pc, dynamics::involution(&pc, Involution::R, z)?),
                dynamics::hamiltonian(&hill, z),
                dynamics::hamiltonian(&hill, dynamics::involution(&hill, Involution::RPrime, z)?),
            ) else {
                continue;
            };
            e_h = e_h.max(rel(h, hr));
            e_hill = e_hill.max(rel(g, gr));
            e_q = e_q.max(rel(surface.q_value(&w), surface.q_value(&moser::regularized_involution(&w))));
            if let (Ok(a), Ok(b)) =
                (moser::moser_map(&moser::regularized_involution(&w), &pc, Primary::Moon), moser::moser_map(&w, &pc, Primary::Moon))
            {
                let b = dynamics::apply_r(b);
                let scale = b.to_array().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                let d = a.to_array().iter().zip(b.to_array()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                e_m = e_m.max(d / scale);
            }
            n += 1;
        }
        let worst = e_h.max(e_hill).max(e_q).max(e_m);
        Ok((worst <= 1e-12, format!("{samples} points: H {e_h:.1e}, Hill {e_hill:.1e}, Q {e_q:.1e}, Moser {e_m:.1e} (rel, <= 1e-12)")))
    })
}

pub fn regularization_correspondence(cfg: &IntegratorConfig) -> Outcome {
    timed(3, "regularization correspondence", || {
        let kind = ProblemKind::pcrtbp(0.1)?;
        let c = l1_energy(0.1) - 0.2;
        let s = RegularizedSurface::new(kind, Primary::Moon, c)?;
        let w0 = s.fixed_locus_point(2.0, 1)?;
        let ret = flow::return_to_fixed_locus(&s, w0, 1e-6, 100.0, cfg)?;
        let Some((s_ret, ..)) = ret.returned() else {
            return Ok((false, "no axis return".into()));
        };
        let traj = flow::integrate_sphere(&s, w0, s_ret, cfg)?;
        let z0 = moser::moser_map(&w0, &kind, Primary::Moon)?;
        let n = traj.len();
        let mut worst = 0.0f64;
        for k in 1..=20 {
            let y = &traj.states[k * (n - 1) / 20];
            let w = SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
            let zs = moser::moser_map(&w, &kind, Primary::Moon)?.to_array();
            let plane = flow::integrate_plane(&kind, z0, y[6], cfg)?;
            let (_, zp) = plane.end();
            worst = worst.max(zs.iter().zip(zp).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        }
        Ok((worst <= 1e-6, format!("mu 0.1, c = H(L1) - 0.2, 20 checkpoints over one axis return: deviation {worst:.1e} <= 1e-6")))
    })
}

fn seg_dist(p: &[f64; 4], a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut ab = [0.0; 4];
    let mut ap = [0.0; 4];
    for i in 0..4 {
        ab[i] = b[i] - a[i];
        ap[i] = p[i] - a[i];
    }
    let den: f64 = ab.iter().map(|v| v * v).sum();
    let t = if den > 0.0 { (ab.iter().zip(&ap).map(|(x, y)| x * y).sum::<f64>() / den).clamp(0.0, 1.0) } else { 0.0 };
    (0..4).map(|i| (ap[i] - t * ab[i]).powi(2)).sum::<f64>().sqrt()
}

fn directed_distance(from: &[[f64; 4]], to: &[[f64; 4]]) -> f64 {
    use rayon::prelude::*;
    from.par_iter().map(|p| to.windows(2).map(|w| seg_dist(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min)).reduce(|| 0.0, f64::max)
}

/// Hausdorff distance between two polylines in phase space.
pub fn hausdorff(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    directed_distance(a, b).max(directed_distance(b, a))
}

/// Plane trace of the closed orbit through `orbit.start()` over its full period.
fn solver_trace(s: &RegularizedSurface, orbit: &SymmetricOrbit, points: usize, cfg: &IntegratorConfig) -> Result<Vec<[f64; 4]>> {
    let mut cfg = cfg.clone();
    cfg.max_step = cfg.max_step.min(2.0 * orbit.half_period / points as f64);
    let traj = flow::integrate_sphere(s, orbit.start(), 2.0 * orbit.half_period, &cfg)?;
    traj.states
        .iter()
        .map(|y| {
            let w = SpherePhasePoint::new([y[0], y[1], y[2]], [y[3], y[4], y[5]]);
            Ok(moser::moser_map(&w, &s.kind, s.primary)?.to_array())
        })
        .collect()
}

pub fn kepler_circular_recovery(cfg: &IntegratorConfig) -> Outcome {
    timed(4, "rotating Kepler oracle", || {
        let kind = ProblemKind::RotatingKepler;
        let mut ok = true;
        let mut parts = vec![];
        for (orientation, c, want_half) in
            [(orbits::Orientation::Retrograde, -1.5, PI / 9.0), (orbits::Orientation::Direct, -2.5, PI / 7.0)]
        {
            let oracle = orbits::kepler_circular(orientation, c, 2)?;
            let full = 2.0 * oracle.half_period;
            let n = 16000;
            let exact: Vec<[f64; 4]> = (0..=n)
                .map(|i| orbits::kepler_state(oracle.semi_major_axis, 0.0, orientation, full * i as f64 / n as f64).map(|z| z.to_array()))
                .collect::<Result<_>>()?;
            let s = RegularizedSurface::new(kind, Primary::Earth, c)?;
            let scan = ScanConfig { samples_per_circle: 180, crossings: vec![1], ..Default::default() };
            let rep = orbits::find_symmetric_orbits(&s, &scan)?;
            // the candidate whose start lies closest to the oracle trace
            let best = rep
                .orbits
                .iter()
                .filter_map(|o| {
                    let z = moser::moser_map(&o.start(), &kind, Primary::Earth).ok()?.to_array();
                    Some((directed_distance(&[z], &exact), o))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let Some((_, orbit)) = best else {
                ok = false;
                parts.push(format!("c = {c}: no orbit found"));
                continue;
            };
            let trace = solver_trace(&s, orbit, n, cfg)?;
            let h = hausdorff(&trace, &exact);
            let dt = (orbit.half_period_physical - want_half).abs();
            ok &= h <= 1e-6 && dt <= 1e-8;
            parts.push(format!("c = {c}: Hausdorff {h:.1e}, |T/2 - exact| {dt:.1e}"));
        }
        Ok((ok, format!("{} (<= 1e-6, <= 1e-8)", parts.join("; "))))
    })
}

/// Orbits on the moon component at `mu = 0.01`, `c = H(L1) - 0.2`.
pub fn low_mass_scan() -> Result<(RegularizedSurface, Vec<SymmetricOrbit>)> {
    let kind = ProblemKind::pcrtbp(0.01)?;
    let s = RegularizedSurface::new(kind, Primary::Moon, l1_energy(0.01) - 0.2)?;
    let scan = ScanConfig { samples_per_circle: 180, crossings: vec![1, 2, 3], ..Default::default() };
    let rep = orbits::find_symmetric_orbits(&s, &scan)?;
    Ok((s, rep.orbits))
}

pub fn two_orbits(found: &Result<(RegularizedSurface, Vec<SymmetricOrbit>)>, seconds: f64) -> Outcome {
    let mut out = timed(5, "two symmetric orbits", || match found {
        Ok((_, orbits)) => Ok((orbits.len() >= 2, format!("mu 0.01, c = H(L1) - 0.2: {} distinct orbits (>= 2)", orbits.len()))),
        Err(e) => Err(e.clone()),
    });
    out.seconds += seconds;
    out
}

fn feasible_c(k: u32, l: u32) -> f64 {
    let a = (l as f64 / k as f64).powf(2.0 / 3.0);
    -0.5 / a - 0.5 * a.sqrt()
}

pub fn type_classification(solver_orbits: &[&SymmetricOrbit]) -> Outcome {
    timed(6, "type classification", || {
        let mut parity_ok = true;
        let mut parts = vec![];
        for (k, l) in [(1, 1), (1, 2), (2, 1), (2, 3), (3, 2), (1, 4)] {
            let spec = orbits::KeplerOrbitSpec { k, l, orientation: orbits::Orientation::Direct, c: feasible_c(k, l) };
            let orb = orbits::kepler_oracle(spec, 400)?;
            let want = orb.parity_type.expect("oracle orbits carry the parity tag");
            parity_ok &= orb.geometric_type == want;
            parts.push(format!("({k},{l}) {}", orb.geometric_type));
        }
        let checked: Vec<_> = solver_orbits.iter().filter(|o| o.plane_type.is_some()).collect();
        let agree = checked.iter().all(|o| o.criteria_agree());
        Ok((
            parity_ok && agree,
            format!(
                "parity rule (II iff k+l odd) {}: {}; circle vs plane criterion agree on {}/{} solver orbits",
                if parity_ok { "holds" } else { "violated" },
                parts.join(", "),
                checked.iter().filter(|o| o.criteria_agree()).count(),
                checked.len()
            ),
        ))
    })
}

// Brute-force count: each passage of the angle through theta_v + k pi is one
// crossing, endpoints on V count half.
fn winding_twice(theta0: f64, theta1: f64, theta_v: f64) -> i64 {
    let w = |p: f64| ((p - theta_v) / PI).floor() as i64 + ((p - theta_v) / PI).ceil() as i64;
    w(theta1) - w(theta0)
}

fn rotation_cz_oracle(angle: f64) -> i64 {
    // nondegenerate rotation by `angle` >= 0: one crossing at t = 0 counted half,
    // one full crossing at every multiple of 2 pi before the end
    let full = (angle / (2.0 * PI)).floor() as i64;
    2 * full + 1
}

pub fn index_oracles(paths: usize, seed: u64) -> Outcome {
    use crate::index::{cz_index_fn, rs_index_line, LagrangianLinePath};
    use nalgebra::DMatrix;
    timed(7, "index engine oracles", || {
        let mut rot_ok = true;
        for t_end in [0.5, 3.0, 6.0, 7.0, 12.0] {
            let cz = cz_index_fn(|t| DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]), t_end, 800)?;
            rot_ok &= cz.twice == 2 * rotation_cz_oracle(t_end);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mismatches = 0;
        for _ in 0..paths {
            let c: [f64; 5] = std::array::from_fn(|_| rng.random_range(-4.0..4.0));
            let tv: f64 = rng.random_range(-3.0..3.0);
            let f = |t: f64| c[0] * t + c[1] * (3.0 * t + c[2]).sin() + c[3] * (7.0 * t).cos() + c[4];
            let want = winding_twice(f(0.0), f(1.0), tv);
            for n in [400, 800] {
                let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
                let theta = t.iter().map(|&s| f(s)).collect();
                let got = rs_index_line(&LagrangianLinePath { t, theta, theta_v: tv })?;
                mismatches += (got.twice != want) as usize;
            }
        }
        Ok((
            rot_ok && mismatches == 0,
            format!(
                "rotation CZ {} on T in {{0.5, 3, 6, 7, 12}}; {paths} random line paths x 2 resolutions: {mismatches} mismatches (exact)",
                if rot_ok { "matches" } else { "differs" }
            ),
        ))
    })
}

pub fn partner_orbits(found: &Result<(RegularizedSurface, Vec<SymmetricOrbit>)>, cfg: &IntegratorConfig) -> Outcome {
    use crate::orbit_index::linearize_orbit;
    timed(8, "partner orbits", || {
        let (s, orbits) = found.as_ref().map_err(|e| e.clone())?;
        let mut pairs = vec![];
        let mut ok = !orbits.is_empty();
        for o in orbits {
            let lin = linearize_orbit(s, o, cfg)?;
            let (a, b) = (lin.rs_index()?, lin.partner_rs_index()?);
            ok &= a.twice == b.twice;
            pairs.push(format!("{a}={b}"));
        }
        Ok((ok, format!("mu_RS(x) vs mu_RS(x_R) on {} orbits: {} (exact)", orbits.len(), pairs.join(", "))))
    })
}

pub fn mean_index_identity(found: &Result<(RegularizedSurface, Vec<SymmetricOrbit>)>, cfg: &IntegratorConfig) -> Outcome {
    use crate::cover::{dynamical_convexity_spot_check, CoverSurface};
    use crate::orbit_index::{linearize_orbit, mean_indices};
    timed(9, "mean-index identity", || {
        let (s, orbits) = found.as_ref().map_err(|e| e.clone())?;
        let cover = CoverSurface::new(s.kind, s.primary, s.c)?;
        let spot = dynamical_convexity_spot_check(&cover, orbits, cfg)?;
        let convex = spot.min_cz.is_some_and(|m| m >= 3.0);
        let mut ok = !orbits.is_empty();
        let mut parts = vec![];
        for o in orbits {
            let rep = mean_indices(&linearize_orbit(s, o, cfg)?, 16)?;
            ok &= rep.defect <= 0.1;
            if convex {
                ok &= rep.mean_rs > 0.5;
            }
            parts.push(format!("mean {:.3} defect {:.1e}", rep.mean_rs, rep.defect));
        }
        Ok((
            ok,
            format!(
                "m_max 16: {} (defect <= 0.1); spot check min CZ {:?} -> mean > 1/2 {}",
                parts.join("; "),
                spot.min_cz,
                if convex { "required" } else { "not required" }
            ),
        ))
    })
}

pub fn ellipsoid_census(cfg: &IntegratorConfig) -> Outcome {
    use crate::cover::reeb_orbit_cz;
    use crate::ellipsoid::{Census, Ellipsoid};
    timed(10, "ellipsoid census", || {
        let e = Ellipsoid::new(1.0, 2f64.sqrt())?;
        let two = matches!(e.census(), Census::TwoOrbits { short_period, long_period }
            if (short_period - PI).abs() <= 1e-12 && (long_period - PI * 2f64.sqrt()).abs() <= 1e-12);
        let e2 = Ellipsoid::new(1.0, 2.0)?;
        let common = matches!(e2.census(), Census::AllPeriodic { period, .. } if (period - 2.0 * PI).abs() <= 1e-12);
        let (z, t) = e.short_orbit();
        let cz = reeb_orbit_cz(&e, &z, t, cfg)?;
        let want = rotation_cz_oracle(2.0 * PI * (1.0 + e.r1 / e.r2));
        let ok = two && common && cz.twice == 2 * want && want == 3;
        Ok((ok, format!("(1, sqrt 2): two orbits {two}; (1, 2): common period 2 pi {common}; short-orbit CZ {cz} vs oracle {want}")))
    })
}

pub fn homology_tables() -> Outcome {
    use crate::homology::{path_space_ranks, rfh_ranks, RfhRank};
    timed(11, "homology tables", || {
        let p = path_space_ranks();
        let head = p.ranks_up_to(20);
        let table_ok = head[..3] == [1, 3, 4] && head[3..].iter().all(|&r| r == 4) && p.tail() == 4;
        let rfh = rfh_ranks(&p, 1, 2, -20..=20)?;
        let rfh_ok = rfh.iter().filter(|(k, _)| k.abs() >= 2).all(|(_, r)| *r == RfhRank::Rank(4))
            && rfh.iter().filter(|(k, _)| *k == 0 || *k == 1).all(|(_, r)| *r == RfhRank::NotComputed);
        Ok((table_ok && rfh_ok, format!("path ranks {:?}, ...; rfh(d=1, n=2) = 4 for 2 <= |*| <= 20: {rfh_ok} (exact)", &head[..5])))
    })
}

pub fn cover_contract(samples: usize, seed: u64, cfg: &IntegratorConfig) -> Outcome {
    use crate::cover::levi_civita_cover;
    use crate::ellipsoid::pullback_defect;
    timed(12, "cover contract", || {
        let kind = ProblemKind::pcrtbp(0.1)?;
        let c = l1_energy(0.1) - 0.2;
        let mut ok = true;
        let mut parts = vec![];
        for primary in [Primary::Moon, Primary::Earth] {
            match levi_civita_cover(kind, primary, c, samples, seed, cfg) {
                Ok((_, rep)) => {
                    ok &= rep.central_symmetry_error <= 1e-9;
                    parts.push(format!("{primary}: clauses i-iv hold, S = -S error {:.1e}", rep.central_symmetry_error));
                }
                Err(e) => {
                    ok = false;
                    parts.push(format!("{primary}: {e}"));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb4a6e);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let z: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            worst = worst.max(pullback_defect(&z, &w));
        }
        ok &= worst <= 1e-12;
        Ok((ok, format!("{}; Psi^* alpha defect {worst:.1e} (<= 1e-12, S = -S <= 1e-9)", parts.join("; "))))
    })
}

pub fn convexity_checker(samples: usize, seed: u64) -> Outcome {
    use crate::cover::strict_convexity_check;
    use crate::ellipsoid::{Ellipsoid, QuarticSurface};
    timed(13, "convexity checker", || {
        let sphere = strict_convexity_check(&Ellipsoid::sphere(), samples, seed)?;
        let ell = strict_convexity_check(&Ellipsoid::new(1.0, 3.0)?, samples, seed)?;
        let quartic = strict_convexity_check(&QuarticSurface::new(0.6)?, samples, seed)?;
        let ok = sphere.pass && ell.pass && !quartic.pass && quartic.certified_negative;
        Ok((
            ok,
            format!(
                "sphere min {:.3}, ellipsoid(1,3) min {:.3}, quartic(a=0.6) min {:.3} certified negative {}",
                sphere.min_restricted_eigenvalue,
                ell.min_restricted_eigenvalue,
                quartic.min_restricted_eigenvalue,
                quartic.certified_negative
            ),
        ))
    })
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 1000, seed: 20240101, integrator: IntegratorConfig::default() }
    }
}

/// Runs every check in order, printing each line through `report` as it completes.
pub fn run_all(cfg: &VerifyConfig, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let ic = &cfg.integrator;
    let mut out = vec![];
    let mut push = |o: Outcome| {
        report(&o);
        out.push(o);
    };
    push(lagrange_ordering());
    push(symmetry_suite(cfg.samples, cfg.seed));
    push(regularization_correspondence(ic));
    push(kepler_circular_recovery(ic));
    let start = Instant::now();
    let found = low_mass_scan();
    push(two_orbits(&found, start.elapsed().as_secs_f64()));
    let solver: Vec<&SymmetricOrbit> = found.as_ref().map(|(_, o)| o.iter().collect()).unwrap_or_default();
    push(type_classification(&solver));
    push(index_oracles(100, cfg.seed));
    push(partner_orbits(&found, ic));
    push(mean_index_identity(&found, ic));
    push(ellipsoid_census(ic));
    push(homology_tables());
    push(cover_contract(cfg.samples, cfg.seed, ic));
    push(convexity_checker(cfg.samples, cfg.seed));
    out
}
