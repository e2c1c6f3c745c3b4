//! Model surfaces in R^4: ellipsoids with their explicit Reeb flow, a
//! non-convex star-shaped quartic, and the linear brake-orbit maps.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SVector, Vector4};
use num_dual::DualNum;
use serde::{Deserialize, Serialize};

use crate::cover::{liouville_form, DefiningFunction, Point4};
use crate::error::{Error, Result};

/// `E(r1, r2) = { |z1|^2 / r1 + |z2|^2 / r2 = 1 }` with `r1 <= r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Census {
    /// `r1 / r2` is not rational within the denominator bound: only the two axis orbits close.
    TwoOrbits { short_period: f64, long_period: f64 },
    /// `r1 / r2 = p / q`: every orbit closes with common period `lcm(p, q) T1 / p`.
    AllPeriodic { p: u64, q: u64, period: f64 },
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("ellipsoid radii must be positive (got {a}, {b})")));
        }
        Ok(Self { r1: a.min(b), r2: a.max(b) })
    }

    pub fn sphere() -> Self {
        Self { r1: 1.0, r2: 1.0 }
    }

    /// `z(t) = (a1 e^(2 i t / r1), a2 e^(2 i t / r2))`, with `a_j` complex as `[re, im]`.
    pub fn flow(&self, a1: [f64; 2], a2: [f64; 2], t: f64) -> Point4 {
        let rot = |a: [f64; 2], w: f64| {
            let (s, c) = (w * t).sin_cos();
            [a[0] * c - a[1] * s, a[0] * s + a[1] * c]
        };
        let z1 = rot(a1, 2.0 / self.r1);
        let z2 = rot(a2, 2.0 / self.r2);
        [z1[0], z2[0], z1[1], z2[1]]
    }

    pub fn periods(&self) -> (f64, f64) {
        (PI * self.r1, PI * self.r2)
    }

    /// Start point and period of the orbit in the `z1`-plane.
    pub fn short_orbit(&self) -> (Point4, f64) {
        ([self.r1.sqrt(), 0.0, 0.0, 0.0], PI * self.r1)
    }

    pub fn long_orbit(&self) -> (Point4, f64) {
        ([0.0, self.r2.sqrt(), 0.0, 0.0], PI * self.r2)
    }

    pub fn census(&self) -> Census {
        match rational_approximation(self.r1 / self.r2, 1_000_000) {
            Some((p, q)) => {
                let l = p / gcd(p, q) * q;
                Census::AllPeriodic { p, q, period: l as f64 * PI * self.r1 / p as f64 }
            }
            None => Census::TwoOrbits { short_period: PI * self.r1, long_period: PI * self.r2 },
        }
    }

    fn g_generic<D: DualNum<Primitive = f64> + Copy>(&self, z: &SVector<D, 4>) -> D {
        (z[0] * z[0] + z[2] * z[2]) / self.r1 + (z[1] * z[1] + z[3] * z[3]) / self.r2 - 1.0
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Continued-fraction convergent `p / q` equal to `x` to rounding, with `q <= max_den`.
pub fn rational_approximation(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0) {
        return None;
    }
    let tol = 4.0 * f64::EPSILON * x.max(1.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a.checked_mul(p1)?.checked_add(p0)?, a.checked_mul(q1)?.checked_add(q0)?);
        if q2 > max_den {
            break;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol {
            return Some((p2, q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

macro_rules! defining_function_via_duals {
    ($t:ty) => {
        impl DefiningFunction for $t {
            fn value(&self, z: &Point4) -> f64 {
                self.g_generic(&SVector::from(*z))
            }

            fn gradient(&self, z: &Point4) -> Vector4<f64> {
                num_dual::gradient(|u| self.g_generic(&u), &Vector4::from(*z)).1
            }

            fn hessian(&self, z: &Point4) -> Matrix4<f64> {
                num_dual::hessian(|u| self.g_generic(&u), &Vector4::from(*z)).2
            }
        }
    };
}

defining_function_via_duals!(Ellipsoid);
defining_function_via_duals!(QuarticSurface);

/// `|z|^4 - |z|^2 - a (x1^2 - x2^2)^2 = 0`: star-shaped for `0 < a < 1`,
/// pinched (not convex) for `a > 1/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticSurface {
    pub a: f64,
}

impl QuarticSurface {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!("quartic surface needs 0 < a < 1 (got {a})")));
        }
        Ok(Self { a })
    }

    fn g_generic<D: DualNum<Primitive = f64> + Copy>(&self, z: &SVector<D, 4>) -> D {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + z[3] * z[3];
        let d = z[0] * z[0] - z[1] * z[1];
        r2 * r2 - r2 - d * d * self.a
    }
}

/// `Psi(x1, x2, y1, y2) = (x1, -y2, y1, x2)`.
pub fn brake_psi(z: &Point4) -> Point4 {
    [z[0], -z[3], z[2], z[1]]
}

pub fn brake_psi_inv(w: &Point4) -> Point4 {
    [w[0], w[3], w[2], -w[1]]
}

/// `(x1, x2, y1, y2) -> (-x1, x2, y1, -y2)`.
pub fn cover_involution(z: &Point4) -> Point4 {
    [-z[0], z[1], z[2], -z[3]]
}

/// `N = Psi o N~ o Psi^-1`.
pub fn brake_involution(w: &Point4) -> Point4 {
    brake_psi(&cover_involution(&brake_psi_inv(w)))
}

pub fn linear_map_matrix(f: impl Fn(&Point4) -> Point4) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        m.set_column(k, &Vector4::from(f(&e)));
    }
    m
}

/// Basis of the fixed space of `N` (the `+1` eigenspace).
pub fn brake_fixed_space() -> Vec<Vector4<f64>> {
    let n = linear_map_matrix(brake_involution);
    // N is a symmetric involution, so (Id + N) / 2 projects onto its fixed space
    let p = (Matrix4::identity() + n) * 0.5;
    let eig = p.symmetric_eigen();
    (0..4).filter(|&k| (eig.eigenvalues[k] - 1.0).abs() < 1e-12).map(|k| eig.eigenvectors.column(k).into_owned()).collect()
}

/// `|alpha_{Psi z}(Psi w) - alpha_z(w)|`.
pub fn pullback_defect(z: &Point4, w: &Point4) -> f64 {
    let lhs = liouville_form(&Vector4::from(brake_psi(z)), &Vector4::from(brake_psi(w)));
    let rhs = liouville_form(&Vector4::from(*z), &Vector4::from(*w));
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_examples() {
        let e = Ellipsoid::new(1.0, 2.0).unwrap();
        match e.census() {
            Census::AllPeriodic { p, q, period } => {
                assert_eq!((p, q), (1, 2));
                assert!((period - 2.0 * PI).abs() < 1e-14);
            }
            c => panic!("{c:?}"),
        }
        let e = Ellipsoid::new(1.0, 2f64.sqrt()).unwrap();
        assert!(matches!(e.census(), Census::TwoOrbits { .. }));
        assert_eq!(rational_approximation(0.6, 1000), Some((3, 5)));
    }

    #[test]
    fn flow_starts_at_amplitudes() {
        let e = Ellipsoid::new(1.0, 3.0).unwrap();
        let z = e.flow([0.3, 0.1], [0.2, -0.5], 0.0);
        assert_eq!(z, [0.3, 0.2, 0.1, -0.5]);
    }

    #[test]
    fn brake_maps_are_linear_involutions() {
        let z = [0.3, -1.2, 0.7, 2.1];
        assert_eq!(cover_involution(&cover_involution(&z)), z);
        assert_eq!(brake_psi_inv(&brake_psi(&z)), z);
        assert_eq!(brake_involution(&brake_involution(&z)), z);
        // Psi commutes with -Id
        assert_eq!(brake_psi(&z.map(|v| -v)), brake_psi(&z).map(|v| -v));
        assert_eq!(brake_fixed_space().len(), 2);
    }
}
