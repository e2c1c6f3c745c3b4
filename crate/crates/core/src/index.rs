//! Robbin-Salamon indices of Lagrangian paths from crossing forms, and the
//! Conley-Zehnder index of a symplectic path as the index of its graph
//! relative to the diagonal.
//!
//! Conventions: `omega0(u, v) = u^T J v` with `J = [[0, I], [-I, 0]]`, so in
//! the plane `omega0 = dx ^ dy` and counterclockwise rotation is positive.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub t: f64,
    pub signature: i32,
    pub endpoint: bool,
}

/// A half-integer index, stored as twice its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub twice: i64,
    pub crossings: Vec<CrossingRecord>,
}

impl IndexValue {
    pub fn zero() -> Self {
        Self { twice: 0, crossings: vec![] }
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Recomputes the value from the crossing records.
    pub fn from_records(&self) -> i64 {
        self.crossings.iter().map(|c| if c.endpoint { c.signature as i64 } else { 2 * c.signature as i64 }).sum()
    }

    pub fn is_integer(&self) -> bool {
        self.twice % 2 == 0
    }

    /// Shifts by a half-integer given as twice its value.
    pub fn shifted(&self, twice: i64) -> Self {
        Self { twice: self.twice + twice, crossings: self.crossings.clone() }
    }
}

impl std::fmt::Display for IndexValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Standard symplectic matrix of size `2n`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Path of lines in the plane given by a continuous angle lift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianLinePath {
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_v: f64,
}

impl LagrangianLinePath {
    /// Lifts the lines spanned by `vecs` continuously (each step taken in `(-pi/2, pi/2]`).
    pub fn from_vectors(t: Vec<f64>, vecs: &[[f64; 2]], theta_v: f64) -> Result<Self> {
        if t.len() != vecs.len() || t.len() < 2 {
            return Err(Error::InvalidParameter("line path needs matching samples (at least two)".into()));
        }
        let mut theta = Vec::with_capacity(vecs.len());
        let mut prev = vecs[0][1].atan2(vecs[0][0]);
        theta.push(prev);
        for v in &vecs[1..] {
            let raw = v[1].atan2(v[0]);
            let mut d = (raw - prev).rem_euclid(std::f64::consts::PI);
            if d > std::f64::consts::FRAC_PI_2 {
                d -= std::f64::consts::PI;
            }
            prev += d;
            theta.push(prev);
        }
        let path = Self { t, theta, theta_v };
        path.check_sampling()?;
        Ok(path)
    }

    /// Consecutive samples must differ by less than `pi/4`.
    pub fn check_sampling(&self) -> Result<()> {
        for (k, w) in self.theta.windows(2).enumerate() {
            if (w[1] - w[0]).abs() >= std::f64::consts::FRAC_PI_4 {
                return Err(Error::Numerical(format!("line path undersampled near t = {} (angle step {:.3})", self.t[k], w[1] - w[0])));
            }
        }
        Ok(())
    }
}

const LINE_TOL: f64 = 1e-9;
/// `|det(Id - Psi(T))|` below this counts as a degenerate endpoint.
pub const DEGENERATE_DET: f64 = 1e-6;

/// Crossing sum of a line path relative to the reference angle `theta_v`.
fn line_crossings(t: &[f64], theta: &[f64], theta_v: f64) -> (i64, Vec<CrossingRecord>, Vec<f64>) {
    let pi = std::f64::consts::PI;
    let phi: Vec<f64> = theta.iter().map(|v| v - theta_v).collect();
    let on_v = |p: f64| p.sin().abs() < LINE_TOL;
    let n = phi.len();
    let mut twice = 0;
    let mut records = vec![];
    let mut degenerate = vec![];
    let sgn = |d: f64| {
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };

    for i in 0..n {
        if !on_v(phi[i]) {
            continue;
        }
        let endpoint = i == 0 || i == n - 1;
        let d = if i == 0 {
            phi[1] - phi[0]
        } else if i == n - 1 {
            phi[n - 1] - phi[n - 2]
        } else {
            let (a, b) = (phi[i - 1] - phi[i], phi[i + 1] - phi[i]);
            if a.signum() == b.signum() || a.abs() < LINE_TOL || b.abs() < LINE_TOL {
                degenerate.push(t[i]);
                continue;
            }
            phi[i + 1] - phi[i - 1]
        };
        if d.abs() < LINE_TOL {
            degenerate.push(t[i]);
            continue;
        }
        let s = sgn(d);
        twice += if endpoint { s as i64 } else { 2 * s as i64 };
        records.push(CrossingRecord { t: t[i], signature: s, endpoint });
    }
    // crossings strictly inside a sampling interval
    for i in 0..n - 1 {
        let (a, b) = (phi[i], phi[i + 1]);
        // a sample on V was counted above; steps are shorter than pi/4
        if on_v(a) || on_v(b) {
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut k = (lo / pi).ceil();
        while k * pi < hi {
            let x = k * pi;
            let s = sgn(b - a);
            let tc = t[i] + (t[i + 1] - t[i]) * (x - a) / (b - a);
            twice += 2 * s as i64;
            records.push(CrossingRecord { t: tc, signature: s, endpoint: false });
            k += 1.0;
        }
    }
    records.sort_by(|x, y| x.t.total_cmp(&y.t));
    (twice, records, degenerate)
}

/// Robbin-Salamon index of a line path against the line at angle `theta_v`.
pub fn rs_index_line(path: &LagrangianLinePath) -> Result<IndexValue> {
    path.check_sampling()?;
    let (twice, crossings, degenerate) = line_crossings(&path.t, &path.theta, path.theta_v);
    if degenerate.is_empty() {
        return Ok(IndexValue { twice, crossings });
    }
    // shift the reference line both ways; interior results must agree, endpoint ones are averaged
    let eps = 1e-6;
    let (a, ra, da) = line_crossings(&path.t, &path.theta, path.theta_v + eps);
    let (b, _, db) = line_crossings(&path.t, &path.theta, path.theta_v - eps);
    if !da.is_empty() || !db.is_empty() {
        return Err(Error::DegenerateCrossing { times: degenerate });
    }
    let t0 = path.t[0];
    let t1 = *path.t.last().unwrap();
    let at_end = degenerate.iter().any(|&t| t == t0 || t == t1);
    if a == b {
        return Ok(IndexValue { twice: a, crossings: ra });
    }
    if at_end && (a + b) % 2 == 0 {
        return Ok(IndexValue { twice: (a + b) / 2, crossings: ra });
    }
    Err(Error::DegenerateCrossing { times: degenerate })
}

/// Lagrangian path given by `2n x n` frames on `[t0, t1]`.
pub struct LagrangianPath<'a> {
    pub frame: Box<dyn Fn(f64) -> DMatrix<f64> + Sync + 'a>,
    pub t0: f64,
    pub t1: f64,
    /// Initial sampling used to locate crossings.
    pub samples: usize,
}

fn orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix column signs so the factor varies continuously
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

fn sigma_min(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

struct Crossing {
    t: f64,
    endpoint: bool,
}

/// Locates times where `Lambda(t)` meets `V`.
fn locate_crossings(path: &LagrangianPath, v: &DMatrix<f64>) -> Vec<Crossing> {
    let n = path.samples.max(8);
    let ts: Vec<f64> = (0..=n).map(|i| path.t0 + (path.t1 - path.t0) * i as f64 / n as f64).collect();
    let eval = |t: f64| {
        let z = orthonormal(&(path.frame)(t));
        let m = hstack(&z, v);
        (m.determinant(), sigma_min(&m))
    };
    let vals: Vec<(f64, f64)> = ts.iter().map(|&t| eval(t)).collect();
    let tol = 1e-8;
    let mut out: Vec<Crossing> = vec![];
    let push = |out: &mut Vec<Crossing>, t: f64, endpoint: bool| {
        let close = (path.t1 - path.t0).abs() * 1e-9;
        if !out.iter().any(|c| (c.t - t).abs() <= close) {
            out.push(Crossing { t, endpoint });
        }
    };
    if vals[0].1 < tol {
        push(&mut out, path.t0, true);
    }
    if vals[n].1 < tol {
        push(&mut out, path.t1, true);
    }
    for i in 0..n {
        let (da, db) = (vals[i].0, vals[i + 1].0);
        if da * db < 0.0 && vals[i].1 >= tol && vals[i + 1].1 >= tol {
            let (mut lo, mut hi) = (ts[i], ts[i + 1]);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if eval(mid).0 * da > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            push(&mut out, 0.5 * (lo + hi), false);
        }
    }
    // even-order contacts: interior local minima of the smallest singular value
    for i in 1..n {
        let s = vals[i].1;
        if s <= vals[i - 1].1 && s <= vals[i + 1].1 && vals[i - 1].0 * vals[i + 1].0 >= 0.0 && s < 0.05 {
            let (mut a, mut b) = (ts[i - 1], ts[i + 1]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            for _ in 0..120 {
                if eval(c).1 < eval(d).1 {
                    b = d;
                } else {
                    a = c;
                }
                c = b - g * (b - a);
                d = a + g * (b - a);
            }
            let tm = 0.5 * (a + b);
            if eval(tm).1 < tol {
                let endpoint = (tm - path.t0).abs() < 1e-9 * (path.t1 - path.t0) || (path.t1 - tm).abs() < 1e-9 * (path.t1 - path.t0);
                push(&mut out, tm, endpoint);
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Signature of the crossing form at `t`, or `None` if it is degenerate.
fn crossing_signature(path: &LagrangianPath, v: &DMatrix<f64>, omega: &DMatrix<f64>, t: f64) -> Option<i32> {
    let z = orthonormal(&(path.frame)(t));
    let k = z.ncols();
    let m = hstack(&z, &(-v));
    let svd = m.clone().svd(true, true);
    let vt = svd.v_t.as_ref()?;
    let sv = &svd.singular_values;
    let scale = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    let null: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| sv[i] < 1e-6 * scale)
        .map(|i| {
            let row = vt.row(i).transpose();
            let c = row.rows(0, k).into_owned();
            &z * c
        })
        .collect();
    if null.is_empty() {
        return None;
    }
    // orthonormal basis of the intersection
    let mut basis: Vec<DVector<f64>> = vec![];
    for mut u in null {
        for b in &basis {
            let p = b.dot(&u);
            u -= b * p;
        }
        let nrm = u.norm();
        if nrm > 1e-8 {
            basis.push(u / nrm);
        }
    }
    let w = omega * &z;
    let h = 1e-6 * (path.t1 - path.t0).abs().max(1e-3);
    let solve_w = |tt: f64, u: &DVector<f64>| -> Option<DVector<f64>> {
        let zz = orthonormal(&(path.frame)(tt));
        let a = hstack(&zz, &(-&w));
        let sol = a.lu().solve(u)?;
        Some(&w * sol.rows(k, k))
    };
    let d = basis.len();
    let mut form = DMatrix::zeros(d, d);
    for j in 0..d {
        let wp = solve_w(t + h, &basis[j])?;
        let wm = solve_w(t - h, &basis[j])?;
        for i in 0..d {
            let a = basis[i].dot(&(omega * &wp));
            let b = basis[i].dot(&(omega * &wm));
            form[(i, j)] = (a - b) / (2.0 * h);
        }
    }
    let sym = (&form + form.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let big = eig.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    let mut sig = 0;
    for e in eig.iter() {
        if e.abs() < 1e-5 * big {
            return None;
        }
        sig += if *e > 0.0 { 1 } else { -1 };
    }
    Some(sig)
}

fn rs_general_once(path: &LagrangianPath, v: &DMatrix<f64>, omega: &DMatrix<f64>) -> std::result::Result<IndexValue, Vec<f64>> {
    let crossings = locate_crossings(path, v);
    let mut twice = 0;
    let mut records = vec![];
    let mut bad = vec![];
    for c in crossings {
        match crossing_signature(path, v, omega, c.t) {
            Some(s) => {
                twice += if c.endpoint { s as i64 } else { 2 * s as i64 };
                records.push(CrossingRecord { t: c.t, signature: s, endpoint: c.endpoint });
            }
            None => bad.push(c.t),
        }
    }
    if bad.is_empty() {
        Ok(IndexValue { twice, crossings: records })
    } else {
        Err(bad)
    }
}

/// Robbin-Salamon index of `Lambda` relative to the Lagrangian `V` (columns span `V`),
/// for the symplectic form with matrix `omega` (orthogonal, `omega^2 = -1`).
pub fn rs_index_general(path: &LagrangianPath, v: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<IndexValue> {
    let v = orthonormal(v);
    match rs_general_once(path, &v, omega) {
        Ok(val) => Ok(val),
        Err(bad) => {
            // rotate V by the symplectic rotations exp(+-eps omega)
            let eps = 1e-5;
            let dim = omega.nrows();
            let rot = |e: f64| DMatrix::<f64>::identity(dim, dim) * e.cos() + omega * e.sin();
            let a = rs_general_once(path, &(rot(eps) * &v), omega);
            let b = rs_general_once(path, &(rot(-eps) * &v), omega);
            match (a, b) {
                (Ok(a), Ok(b)) if a.twice == b.twice => Ok(a),
                (Ok(a), Ok(b))
                    if (a.twice + b.twice) % 2 == 0 && bad.iter().any(|&t| (t - path.t0).abs() < 1e-9 || (t - path.t1).abs() < 1e-9) =>
                {
                    Ok(IndexValue { twice: (a.twice + b.twice) / 2, crossings: a.crossings })
                }
                _ => Err(Error::DegenerateCrossing { times: bad }),
            }
        }
    }
}

/// Sampled path of symplectic matrices with `Psi(0) = Id`.
#[derive(Debug, Clone)]
pub struct SymplecticPath {
    pub t: Vec<f64>,
    pub psi: Vec<DMatrix<f64>>,
}

impl SymplecticPath {
    pub fn new(t: Vec<f64>, psi: Vec<DMatrix<f64>>) -> Result<Self> {
        if t.len() != psi.len() || t.len() < 2 {
            return Err(Error::InvalidParameter("symplectic path needs matching samples".into()));
        }
        let dim = psi[0].nrows();
        if dim % 2 != 0 {
            return Err(Error::InvalidParameter("symplectic matrices need even size".into()));
        }
        let j = standard_j(dim / 2);
        for (k, m) in psi.iter().enumerate() {
            let defect = (m.transpose() * &j * m - &j).amax();
            if defect > 1e-8 {
                return Err(Error::Numerical(format!("sample {k} is not symplectic (defect {defect:.2e})")));
            }
        }
        if (&psi[0] - DMatrix::<f64>::identity(dim, dim)).amax() > 1e-10 {
            return Err(Error::InvalidParameter("symplectic path must start at the identity".into()));
        }
        Ok(Self { t, psi })
    }

    pub fn from_2x2(t: Vec<f64>, psi: &[Matrix2<f64>]) -> Result<Self> {
        Self::new(t, psi.iter().map(|m| DMatrix::from_column_slice(2, 2, m.as_slice())).collect())
    }

    /// Piecewise-linear interpolation (renormalized to determinant one in dimension two).
    pub fn at(&self, tt: f64) -> DMatrix<f64> {
        let k = match self.t.binary_search_by(|x| x.total_cmp(&tt)) {
            Ok(k) => return self.psi[k].clone(),
            Err(k) => k.clamp(1, self.t.len() - 1),
        };
        let (a, b) = (self.t[k - 1], self.t[k]);
        let s = ((tt - a) / (b - a)).clamp(0.0, 1.0);
        let m = &self.psi[k - 1] * (1.0 - s) + &self.psi[k] * s;
        if m.nrows() == 2 {
            let d = m.determinant();
            if d > 0.0 {
                return m / d.sqrt();
            }
        }
        m
    }
}

/// Conley-Zehnder index of a path given as a function on `[0, t_end]`.
pub fn cz_index_fn(psi: impl Fn(f64) -> DMatrix<f64> + Sync, t_end: f64, samples: usize) -> Result<IndexValue> {
    let end = psi(t_end);
    let dim = end.nrows();
    let n = dim / 2;
    let det = (DMatrix::<f64>::identity(dim, dim) - &end).determinant();
    if det.abs() < DEGENERATE_DET {
        return Err(Error::DegenerateEndpoint { det: det.abs() });
    }
    let j = standard_j(n);
    let mut omega = DMatrix::zeros(2 * dim, 2 * dim);
    omega.view_mut((0, 0), (dim, dim)).copy_from(&(-&j));
    omega.view_mut((dim, dim), (dim, dim)).copy_from(&j);
    let graph = move |t: f64| {
        let mut f = DMatrix::zeros(2 * dim, dim);
        f.view_mut((0, 0), (dim, dim)).fill_with_identity();
        f.view_mut((dim, 0), (dim, dim)).copy_from(&psi(t));
        f
    };
    let mut diag = DMatrix::zeros(2 * dim, dim);
    diag.view_mut((0, 0), (dim, dim)).fill_with_identity();
    diag.view_mut((dim, 0), (dim, dim)).fill_with_identity();
    let path = LagrangianPath { frame: Box::new(graph), t0: 0.0, t1: t_end, samples };
    rs_index_general(&path, &diag, &omega)
}

/// Conley-Zehnder index of a sampled symplectic path.
pub fn cz_index(path: &SymplecticPath) -> Result<IndexValue> {
    let t_end = *path.t.last().unwrap();
    let samples = (4 * path.t.len()).max(400);
    cz_index_fn(|t| path.at(t), t_end, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot(t: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    }

    fn line_path(f: impl Fn(f64) -> f64, t1: f64, n: usize) -> LagrangianLinePath {
        let t: Vec<f64> = (0..=n).map(|i| t1 * i as f64 / n as f64).collect();
        let theta = t.iter().map(|&s| f(s)).collect();
        LagrangianLinePath { t, theta, theta_v: 0.0 }
    }

    #[test]
    fn line_index_examples() {
        let pi = std::f64::consts::PI;
        assert_eq!(rs_index_line(&line_path(|_| 0.7, 1.0, 10)).unwrap().twice, 0);
        assert_eq!(rs_index_line(&line_path(|t| t, pi, 100)).unwrap().twice, 2);
        assert_eq!(rs_index_line(&line_path(|t| -t, pi, 100)).unwrap().twice, -2);
        // a tangential touch contributes nothing
        let touch = line_path(|t| (t - 0.5).powi(2), 1.0, 101);
        assert_eq!(rs_index_line(&touch).unwrap().twice, 0);
    }

    #[test]
    fn general_agrees_with_line_in_dimension_two() {
        let pi = std::f64::consts::PI;
        let frame = |t: f64| DMatrix::from_column_slice(2, 1, &[(1.3 * t).cos(), (1.3 * t).sin()]);
        let path = LagrangianPath { frame: Box::new(frame), t0: 0.0, t1: 2.0 * pi, samples: 200 };
        let v = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let g = rs_index_general(&path, &v, &standard_j(1)).unwrap();
        let l = rs_index_line(&line_path(|t| 1.3 * t, 2.0 * pi, 400)).unwrap();
        assert_eq!(g.twice, l.twice);
    }

    #[test]
    fn rotation_cz() {
        let pi = std::f64::consts::PI;
        assert_eq!(cz_index_fn(rot, 1.0, 200).unwrap().twice, 2);
        assert_eq!(cz_index_fn(rot, 2.0 * pi - 0.1, 200).unwrap().twice, 2);
        assert_eq!(cz_index_fn(rot, 2.0 * pi + 0.1, 400).unwrap().twice, 6);
        assert_eq!(cz_index_fn(|t| rot(-t), 1.0, 200).unwrap().twice, -2);
        assert!(matches!(cz_index_fn(rot, 2.0 * pi, 200), Err(Error::DegenerateEndpoint { .. })));
    }

    #[test]
    fn hyperbolic_paths() {
        let hyp = |t: f64| DMatrix::from_row_slice(2, 2, &[t.exp(), 0.0, 0.0, (-t).exp()]);
        assert_eq!(cz_index_fn(hyp, 1.0, 200).unwrap().twice, 0);
        let pi = std::f64::consts::PI;
        let neg = move |t: f64| rot(t * pi) * hyp(t);
        assert_eq!(cz_index_fn(neg, 1.0, 400).unwrap().twice, 2);
    }

    #[test]
    fn index_display() {
        assert_eq!(IndexValue { twice: 3, crossings: vec![] }.to_string(), "3/2");
        assert_eq!(IndexValue { twice: -4, crossings: vec![] }.to_string(), "-2");
    }
}
