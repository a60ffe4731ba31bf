//! SVD-based matrix machinery: truncation, low-rank approximation,
//! pseudo-inverse, PCA, whitening and CCA.

use crate::error::{ensure, Error, Result};
use crate::linalg::{self, default_rank_tol, SvdResult};
use crate::tensor::Matrix;

pub use crate::linalg::svd;

/// First `k` singular triplets.
pub fn truncated_svd(m: &Matrix, k: usize) -> Result<SvdResult> {
    let r = m.rows().min(m.cols());
    ensure!(k >= 1 && k <= r, Validation, "rank {} out of range 1..={}", k, r);
    Ok(svd(m)?.truncate(k))
}

/// Best rank-`k` approximation `U_k D_k V_kᵀ`.
pub fn low_rank_approx(m: &Matrix, k: usize) -> Result<Matrix> {
    Ok(truncated_svd(m, k)?.reconstruct())
}

/// Moore-Penrose inverse over the numerical rank.
pub fn pseudo_inverse(m: &Matrix) -> Result<Matrix> {
    let s = svd(m)?;
    let tol = default_rank_tol(m.rows(), m.cols(), &s.singular_values);
    Ok(pinv_from(&s, tol))
}

/// Pseudo-inverse with an explicit singular value cutoff.
pub fn pseudo_inverse_with_tol(m: &Matrix, tol: f64) -> Result<Matrix> {
    Ok(pinv_from(&svd(m)?, tol))
}

fn pinv_from(s: &SvdResult, tol: f64) -> Matrix {
    let inv: Vec<f64> = s.singular_values.iter().map(|&x| if x > tol { 1.0 / x } else { 0.0 }).collect();
    s.v.scale_cols(&inv).matmul(&s.u.transpose()).expect("svd shapes")
}

/// Optimal affine rank-`k` projection of a data set.
#[derive(Debug, Clone)]
pub struct Pca {
    /// `P* = U_k U_kᵀ`.
    pub projector: Matrix,
    /// `p₀* = (I − P*) μ`.
    pub offset: Vec<f64>,
    pub components: Matrix,
    /// Top-`k` covariance eigenvalues, descending.
    pub variances: Vec<f64>,
    pub mean: Vec<f64>,
}

impl Pca {
    /// Mean squared residual `‖x − (P x + p₀)‖²` over the rows of `data`.
    pub fn objective(&self, data: &Matrix) -> f64 {
        projection_objective(data, &self.projector, &self.offset)
    }
}

pub fn projection_objective(data: &Matrix, p: &Matrix, p0: &[f64]) -> f64 {
    let mut tot = 0.0;
    for i in 0..data.rows() {
        let x = data.row(i);
        let px = p.matvec(x).expect("projector shape");
        tot += x.iter().zip(&px).zip(p0).map(|((a, b), c)| (a - b - c).powi(2)).sum::<f64>();
    }
    tot / data.rows() as f64
}

pub fn column_mean(data: &Matrix) -> Vec<f64> {
    let n = data.rows() as f64;
    let mut m = vec![0.0; data.cols()];
    for i in 0..data.rows() {
        m.iter_mut().zip(data.row(i)).for_each(|(a, b)| *a += b);
    }
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// `(1/n) Σ xᵢ xᵢᵀ` over rows.
pub fn second_moment(data: &Matrix) -> Matrix {
    data.t_matmul(data).expect("same rows").scale(1.0 / data.rows() as f64)
}

pub fn covariance(data: &Matrix) -> Matrix {
    let mu = column_mean(data);
    let centered = Matrix::from_fn(data.rows(), data.cols(), |i, j| data.get(i, j) - mu[j]);
    second_moment(&centered)
}

pub fn pca(data: &Matrix, k: usize) -> Result<Pca> {
    ensure!(data.rows() >= 1, Validation, "pca needs at least one sample");
    ensure!(k >= 1 && k <= data.cols(), Validation, "rank {} out of range 1..={}", k, data.cols());
    let mean = column_mean(data);
    let (vals, vecs) = linalg::sym_eigen(&covariance(data))?;
    let components = vecs.take_cols(k);
    let projector = components.matmul(&components.transpose())?;
    let pm = projector.matvec(&mean)?;
    let offset = mean.iter().zip(&pm).map(|(a, b)| a - b).collect();
    Ok(Pca { projector, offset, components, variances: vals[..k].to_vec(), mean })
}

/// Top-`k` eigen-pieces of a symmetric matrix and its whitening matrix.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub u: Matrix,
    /// Signed eigenvalues ordered by decreasing magnitude.
    pub gamma: Vec<f64>,
    /// `U diag(|γ|^{-1/2})`.
    pub w: Matrix,
    /// Eigenvalues beyond `k` (by magnitude) that were dropped.
    pub dropped: Vec<f64>,
}

pub fn whitening(m: &Matrix, k: usize) -> Result<Whitening> {
    let d = m.rows();
    ensure!(m.cols() == d, Dimension, "whitening needs a square matrix");
    ensure!(k >= 1 && k <= d, Validation, "rank {} out of range 1..={}", k, d);
    ensure!(m.asymmetry() <= 1e-8, Validation, "whitening needs a symmetric matrix");
    let (vals, vecs) = linalg::sym_eigen(m)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| vals[j].abs().total_cmp(&vals[i].abs()));
    let gamma: Vec<f64> = order[..k].iter().map(|&i| vals[i]).collect();
    let dropped = order[k..].iter().map(|&i| vals[i]).collect();
    let tol = d as f64 * 2.2e-16 * gamma[0].abs();
    if !(gamma[k - 1].abs() > tol) {
        return Err(Error::RankDeficient(format!(
            "eigenvalue {} of magnitude {:.3e} is below the numerical rank cutoff {:.3e}",
            k,
            gamma[k - 1].abs(),
            tol
        )));
    }
    let u = vecs.select_cols(&order[..k]);
    let w = u.scale_cols(&gamma.iter().map(|g| g.abs().powf(-0.5)).collect::<Vec<_>>());
    Ok(Whitening { u, gamma, w, dropped })
}

/// `W = U diag(|γ|^{-1/2})` so that `WᵀMW = diag(sign γ)`.
pub fn whitening_matrix(m: &Matrix, k: usize) -> Result<Matrix> {
    Ok(whitening(m, k)?.w)
}

#[derive(Debug, Clone)]
pub struct CcaResult {
    pub directions_x: Matrix,
    pub directions_y: Matrix,
    pub correlations: Vec<f64>,
}

/// Canonical correlation directions of paired data sets (rows are samples).
pub fn cca(x: &Matrix, y: &Matrix) -> Result<CcaResult> {
    ensure!(x.rows() == y.rows() && x.rows() > 0, Dimension, "cca needs paired nonempty samples");
    let n = x.rows() as f64;
    let wx = whitening_matrix(&second_moment(x), x.cols())
        .map_err(|e| Error::RankDeficient(format!("x covariance: {}", e)))?;
    let wy = whitening_matrix(&second_moment(y), y.cols())
        .map_err(|e| Error::RankDeficient(format!("y covariance: {}", e)))?;
    let cross = x.t_matmul(y)?.scale(1.0 / n);
    let white = wx.t_matmul(&cross)?.matmul(&wy)?;
    let s = svd(&white)?;
    let r = x.cols().min(y.cols());
    let s = s.truncate(r);
    Ok(CcaResult {
        directions_x: wx.matmul(&s.u)?,
        directions_y: wy.matmul(&s.v)?,
        correlations: s.singular_values,
    })
}
