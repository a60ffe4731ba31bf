//! Dense factorizations: symmetric eigen, SVD, triangular solves, and a real
//! nonsymmetric eigensolver. Everything is deterministic and dependency-free.

use crate::error::{ensure, Error, Result};
use crate::tensor::{dot, norm, Matrix};

const EPS: f64 = f64::EPSILON;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix by cyclic Jacobi.
/// Values come back in descending order, vectors as matching columns.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.rows();
    ensure!(m.cols() == n, Dimension, "eigen of non-square {:?}", m.shape());
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                if apq.abs() <= 1e-300 || apq.abs() <= EPS * 0.5 * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    ensure!(converged, NonConvergence, "jacobi eigensolver exceeded {} sweeps", MAX_SWEEPS);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));
    let vals = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vecs = v.select_cols(&order);
    fix_signs(&mut vecs, None);
    Ok((vals, vecs))
}

/// Make the largest-magnitude entry of each column nonnegative, mirroring the
/// flip onto `partner` when given.
fn fix_signs(u: &mut Matrix, mut partner: Option<&mut Matrix>) {
    for j in 0..u.cols() {
        let mut best = 0usize;
        for i in 0..u.rows() {
            if u.get(i, j).abs() > u.get(best, j).abs() {
                best = i;
            }
        }
        if u.rows() > 0 && u.get(best, j) < 0.0 {
            for i in 0..u.rows() {
                let x = u.get(i, j);
                u.set(i, j, -x);
            }
            if let Some(p) = partner.as_deref_mut() {
                for i in 0..p.rows() {
                    let x = p.get(i, j);
                    p.set(i, j, -x);
                }
            }
        }
    }
}

/// Thin SVD pieces: `M = U diag(σ) Vᵀ` with `r = min(n, m)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        self.u.scale_cols(&self.singular_values).matmul(&self.v.transpose()).expect("consistent svd shapes")
    }

    /// Count of singular values above `max(n,m)·eps·σ₁`.
    pub fn numerical_rank(&self) -> usize {
        let tol = default_rank_tol(self.u.rows(), self.v.rows(), &self.singular_values);
        self.singular_values.iter().filter(|&&s| s > tol).count()
    }

    pub fn truncate(&self, k: usize) -> SvdResult {
        SvdResult {
            u: self.u.take_cols(k),
            singular_values: self.singular_values[..k].to_vec(),
            v: self.v.take_cols(k),
        }
    }
}

pub fn default_rank_tol(n: usize, m: usize, s: &[f64]) -> f64 {
    n.max(m) as f64 * 2.2e-16 * s.first().copied().unwrap_or(0.0)
}

/// Full SVD by one-sided (Hestenes) Jacobi rotations on the columns.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    let (n, c) = m.shape();
    if n < c {
        let t = svd(&m.transpose())?;
        let mut out = SvdResult { u: t.v, singular_values: t.singular_values, v: t.u };
        fix_signs(&mut out.u, Some(&mut out.v));
        return Ok(out);
    }
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = m.columns();
    let mut vcols: Vec<Vec<f64>> = (0..c).map(|j| (0..c).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut converged = c <= 1;
    // Columns below this norm are numerically zero; rotating them only churns noise.
    let floor = (EPS * m.frobenius()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-300 || gamma.abs() <= EPS * (alpha * beta).sqrt() || alpha.min(beta) <= floor {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(&mut cols, p, q, cs, sn);
                rotate(&mut vcols, p, q, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    ensure!(converged, NonConvergence, "one-sided jacobi svd exceeded {} sweeps", MAX_SWEEPS);
    let sig: Vec<f64> = cols.iter().map(|x| norm(x)).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| sig[j].total_cmp(&sig[i]));
    let s1 = sig[order[0]];
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(c);
    let mut svals = Vec::with_capacity(c);
    let mut vv = Vec::with_capacity(c);
    for &j in &order {
        let s = sig[j];
        // columns at roundoff level carry no direction; rebuilt below
        if s > 0.0 && s > s1 * EPS * 0.01 && s * s > floor {
            ucols.push(cols[j].iter().map(|x| x / s).collect());
        } else {
            ucols.push(Vec::new());
        }
        svals.push(s);
        vv.push(vcols[j].clone());
    }
    complete_basis(&mut ucols, n);
    let mut u = Matrix::from_cols(&ucols)?;
    let mut v = Matrix::from_cols(&vv)?;
    fix_signs(&mut u, Some(&mut v));
    Ok(SvdResult { u, singular_values: svals, v })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (a, b) = (&mut lo[p], &mut hi[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fill empty entries of `cols` with unit vectors orthogonal to the rest.
fn complete_basis(cols: &mut [Vec<f64>], n: usize) {
    let mut next_e = 0usize;
    for j in 0..cols.len() {
        if !cols[j].is_empty() {
            continue;
        }
        loop {
            let mut cand = vec![0.0; n];
            cand[next_e % n] = 1.0;
            next_e += 1;
            for _ in 0..2 {
                for other in cols.iter().filter(|c| !c.is_empty()) {
                    let p = dot(&cand, other);
                    cand.iter_mut().zip(other).for_each(|(x, o)| *x -= p * o);
                }
            }
            let nn = norm(&cand);
            if nn > 1e-8 {
                cols[j] = cand.iter().map(|x| x / nn).collect();
                break;
            }
            if next_e > 4 * n {
                cols[j] = vec![0.0; n];
                break;
            }
        }
    }
}

/// Orthonormal Q of a full-column-rank matrix (Gram-Schmidt, twice).
pub fn qr_orthonormal(a: &Matrix) -> Matrix {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.col(j);
        for _ in 0..2 {
            for u in &q {
                let p = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = norm(&v);
        q.push(v.iter().map(|x| x / n).collect());
    }
    Matrix::from_cols(&q).expect("uniform columns")
}

/// Solve `G X = B` for symmetric positive definite `G` by Cholesky.
/// Fails with `RankDeficient` when a pivot falls below `1e-13·max diag`.
pub fn solve_spd(g: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = g.rows();
    ensure!(g.cols() == n && b.rows() == n, Dimension, "solve_spd shapes {:?} {:?}", g.shape(), b.shape());
    let maxd = (0..n).map(|i| g.get(i, i).abs()).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 1e-13 * maxd) || !d.is_finite() {
            return Err(Error::RankDeficient(format!("cholesky pivot {} at column {}", d, j)));
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in i + 1..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

struct Lu {
    lu: Matrix,
    piv: Vec<usize>,
    singular: bool,
}

fn lu(a: &Matrix, floor: f64) -> Lu {
    let n = a.rows();
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if lu.get(i, k).abs() > lu.get(p, k).abs() {
                p = i;
            }
        }
        if p != k {
            for j in 0..n {
                let t = lu.get(k, j);
                lu.set(k, j, lu.get(p, j));
                lu.set(p, j, t);
            }
            piv.swap(k, p);
        }
        if lu.get(k, k).abs() <= floor {
            singular = true;
            lu.set(k, k, if floor > 0.0 { floor } else { 1e-300 });
        }
        let pivot = lu.get(k, k);
        for i in k + 1..n {
            let f = lu.get(i, k) / pivot;
            lu.set(i, k, f);
            for j in k + 1..n {
                let v = lu.get(i, j) - f * lu.get(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Lu { lu, piv, singular }
}

fn lu_apply(f: &Lu, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x: Vec<f64> = f.piv.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            x[i] -= f.lu.get(i, k) * x[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] -= f.lu.get(i, k) * x[k];
        }
        x[i] /= f.lu.get(i, i);
    }
    x
}

/// Solve `A X = B` with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    ensure!(a.cols() == n && b.rows() == n, Dimension, "solve shapes {:?} {:?}", a.shape(), b.shape());
    let scale = a.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let f = lu(a, 0.0);
    ensure!(!f.singular && scale > 0.0, RankDeficient, "singular matrix in solve");
    let cols: Vec<Vec<f64>> = (0..b.cols()).map(|c| lu_apply(&f, &b.col(c))).collect();
    Matrix::from_cols(&cols)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows()))
}

/// Eigenvalues (real, imaginary parts) of a general real matrix via Hessenberg
/// reduction and Francis double-shift QR.
pub fn eigenvalues(a: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    ensure!(a.cols() == n, Dimension, "eigenvalues of non-square {:?}", a.shape());
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    hessenberg(&mut h);
    hqr(h)
}

fn hessenberg(h: &mut [Vec<f64>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0; n];
    for m in 1..n - 1 {
        let scale: f64 = (m..n).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let g = if ort[m] > 0.0 { -hh.sqrt() } else { hh.sqrt() };
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..n {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut() {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in m..n {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
        for i in m + 1..n {
            h[i][m - 1] = 0.0;
        }
    }
}

fn hqr(mut h: Vec<Vec<f64>>) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.len();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    if nn == 0 {
        return Ok((d, e));
    }
    let low = 0isize;
    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut s, mut z);
    let (mut w, mut x, mut y);
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }
    let mut iter = 0usize;
    let mut total = 0usize;
    while n >= low {
        let nu = n as usize;
        let mut l = n;
        while l > low {
            let lu = l as usize;
            s = h[lu - 1][lu - 1].abs() + h[lu][lu].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[lu][lu - 1].abs() < EPS * s {
                break;
            }
            l -= 1;
        }
        if l == n {
            h[nu][nu] += exshift;
            d[nu] = h[nu][nu];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            x = h[nu][nu];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[nu][nu];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            ensure!(total <= 60 * nn, NonConvergence, "hessenberg QR exceeded iteration cap");
            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h[mu][mu];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[mu + 1][mu] + h[mu][mu + 1];
                q = h[mu + 1][mu + 1] - z - r - s;
                r = h[mu + 2][mu + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[mu][mu - 1].abs() * (q.abs() + r.abs())
                    < EPS * (p.abs() * (h[mu - 1][mu - 1].abs() + z.abs() + h[mu + 1][mu + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in mu + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > mu + 2 {
                    h[i][i - 3] = 0.0;
                }
            }
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                } else {
                    x = 0.0;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != mu {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[i][k] + y * h[i][k + 1];
                        if notlast {
                            p += z * h[i][k + 2];
                            h[i][k + 2] -= p * r;
                        }
                        h[i][k] -= p;
                        h[i][k + 1] -= p * q;
                    }
                }
            }
        }
    }
    Ok((d, e))
}

/// Real eigen-decomposition of a general square matrix.
///
/// Complex eigenvalues whose imaginary part exceeds `imag_tol·‖A‖` are an
/// error. Vectors come from inverse iteration and have unit norm.
pub fn real_eigen(a: &Matrix, imag_tol: f64) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    let (re, im) = eigenvalues(a)?;
    let scale = a.frobenius().max(1e-300);
    if let Some(bad) = im.iter().find(|v| v.abs() > imag_tol * scale) {
        return Err(Error::ComplexEigen(format!("imaginary part {:.3e}", bad)));
    }
    let mut vecs = Vec::with_capacity(n);
    for &lam in &re {
        vecs.push(inverse_iteration(a, lam, scale));
    }
    Ok((re, Matrix::from_cols(&vecs)?))
}

fn inverse_iteration(a: &Matrix, lam: f64, scale: f64) -> Vec<f64> {
    let n = a.rows();
    let shifted = Matrix::from_fn(n, n, |i, j| a.get(i, j) - if i == j { lam } else { 0.0 });
    let f = lu(&shifted, EPS * scale);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7548776662466927).fract()).collect();
    for _ in 0..3 {
        let y = lu_apply(&f, &x);
        let ny = norm(&y);
        if !(ny.is_finite() && ny > 0.0) {
            break;
        }
        x = y.iter().map(|v| v / ny).collect();
    }
    let nx = norm(&x);
    let mut x: Vec<f64> = x.iter().map(|v| v / nx).collect();
    let big = x.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    if big < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        let mut g = rng::stream(seed, 5, 5);
        Matrix::from_fn(r, c, |_, _| rng::normal(&mut g))
    }

    fn orthonormality_defect(u: &Matrix) -> f64 {
        u.t_matmul(u).unwrap().max_abs_diff(&Matrix::identity(u.cols()))
    }

    #[test]
    fn sym_eigen_reconstructs() {
        let a = rand_matrix(1, 7, 7);
        let s = a.add(&a.transpose()).unwrap();
        let (vals, v) = sym_eigen(&s).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert!(orthonormality_defect(&v) < 1e-13);
        let back = v.scale_cols(&vals).matmul(&v.transpose()).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn svd_examples() {
        let d = Matrix::diag(&[3.0, 2.0, 1.0]);
        let s = svd(&d).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 2.0, 1.0]);
        for j in 0..3 {
            assert!((s.u.get(j, j).abs() - 1.0).abs() < 1e-15);
        }
        let u = crate::tensor::normalize(&[1.0, 2.0, 3.0]);
        let v = crate::tensor::normalize(&[1.0, -1.0]);
        let r1 = Matrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let s = svd(&r1).unwrap();
        assert!((s.singular_values[0] - r1.frobenius()).abs() < 1e-15);
        assert!(s.singular_values[1].abs() < 1e-15);
        assert!(orthonormality_defect(&s.u) < 1e-12);
        for (r, c) in [(6, 4), (4, 6), (5, 5), (1, 3), (3, 1)] {
            let m = rand_matrix(r as u64 * 10 + c as u64, r, c);
            let s = svd(&m).unwrap();
            assert_eq!(s.singular_values.len(), r.min(c));
            assert!(s.reconstruct().max_abs_diff(&m) <= 1e-13 * m.frobenius());
            assert!(orthonormality_defect(&s.u) < 1e-12);
            assert!(orthonormality_defect(&s.v) < 1e-12);
        }
    }

    #[test]
    fn svd_rank_deficient_basis_is_complete() {
        let a = rand_matrix(3, 6, 2);
        let m = a.matmul(&rand_matrix(4, 2, 5)).unwrap();
        let s = svd(&m).unwrap();
        assert_eq!(s.numerical_rank(), 2);
        assert!(orthonormality_defect(&s.u) < 1e-10);
        assert!(orthonormality_defect(&s.v) < 1e-10);
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-12 * m.frobenius());
    }

    #[test]
    fn svd_small_singular_values_are_accurate() {
        // σ spread over 12 orders of magnitude
        let q1 = rng::orthogonal(&mut rng::stream(1, 0, 0), 5);
        let q2 = rng::orthogonal(&mut rng::stream(2, 0, 0), 5);
        let sig = [1.0, 1e-3, 1e-6, 1e-9, 1e-12];
        let m = q1.scale_cols(&sig).matmul(&q2.transpose()).unwrap();
        let s = svd(&m).unwrap();
        for (a, b) in s.singular_values.iter().zip(sig) {
            assert!((a - b).abs() < 1e-15, "{} vs {}", a, b);
        }
    }

    #[test]
    fn spd_and_lu_solves() {
        let a = rand_matrix(5, 6, 4);
        let g = a.t_matmul(&a).unwrap();
        let b = rand_matrix(6, 4, 3);
        let x = solve_spd(&g, &b).unwrap();
        assert!(g.matmul(&x).unwrap().max_abs_diff(&b) < 1e-12);
        let y = solve(&g, &b).unwrap();
        assert!(y.max_abs_diff(&x) < 1e-10);
        let sing = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve_spd(&sing, &Matrix::identity(2)), Err(Error::RankDeficient(_))));
        assert!(solve(&sing, &Matrix::identity(2)).is_err());
        let m = rand_matrix(7, 5, 5);
        assert!(m.matmul(&inverse(&m).unwrap()).unwrap().max_abs_diff(&Matrix::identity(5)) < 1e-12);
    }

    #[test]
    fn nonsymmetric_eigen_matches_construction() {
        let p = rand_matrix(8, 6, 6);
        let lam = [3.0, -2.0, 1.5, 0.5, -0.25, 4.0];
        let a = p.scale_cols(&lam).matmul(&inverse(&p).unwrap()).unwrap();
        let (vals, vecs) = real_eigen(&a, 1e-10).unwrap();
        let mut got = vals.clone();
        got.sort_by(f64::total_cmp);
        let mut want = lam.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{:?}", got);
        }
        for j in 0..6 {
            let v = vecs.col(j);
            let av = a.matvec(&v).unwrap();
            let res: f64 = av.iter().zip(&v).map(|(x, y)| (x - vals[j] * y).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10);
        }
    }

    #[test]
    fn complex_eigenvalues_are_reported() {
        let rot = Matrix::from_rows(&[vec![0.0, -1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
        let (re, im) = eigenvalues(&rot).unwrap();
        assert_eq!(im.iter().filter(|v| v.abs() > 0.5).count(), 2);
        assert!(re.iter().any(|v| (v - 2.0).abs() < 1e-12));
        assert!(matches!(real_eigen(&rot, 1e-8), Err(Error::ComplexEigen(_))));
    }

    #[test]
    fn eigen_on_triangular_and_larger() {
        let t = Matrix::from_rows(&[vec![1.0, 5.0, 2.0], vec![0.0, 2.0, 7.0], vec![0.0, 0.0, 3.0]]).unwrap();
        let (mut re, _) = eigenvalues(&t).unwrap();
        re.sort_by(f64::total_cmp);
        assert!(re.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        let p = rand_matrix(9, 20, 20);
        let lam: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.37).collect();
        let a = p.scale_cols(&lam).matmul(&inverse(&p).unwrap()).unwrap();
        let (mut re, im) = eigenvalues(&a).unwrap();
        assert!(im.iter().all(|v| v.abs() < 1e-8));
        re.sort_by(f64::total_cmp);
        assert!(re.iter().zip(&lam).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn qr_gives_orthonormal() {
        let q = rng::orthogonal(&mut rng::stream(2, 0, 0), 6);
        assert!(orthonormality_defect(&q) < 1e-14);
    }
}
