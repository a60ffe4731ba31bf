//! Overcomplete symmetric decomposition: tensorization of order-5/6 tensors,
//! FOOBI for order 4, rank-1 detectors and third-order lifting.

use crate::error::{ensure, Error, Result};
use crate::linalg::{real_eigen, solve_spd, svd, sym_eigen};
use crate::power::PowerConfig;
use crate::report::DecompositionReport;
use crate::rng;
use crate::simdiag::{simdiag, SimdiagConfig};
use crate::tensor::{dot, frobenius_norm, kruskal_to_tensor, normalize, DenseTensor, KruskalForm, Matrix};
use crate::whiten::{decompose_nonorthogonal, slice_contract, ScaleModel};

/// Singular values of a matricized `b̂_j` past this fraction of the top one
/// mean the component was not cleanly separated.
const CONTAMINATION: f64 = 0.1;
/// Singular values of Z below `NULL_TOL · σ₁(Z)` count as null.
pub const NULL_TOL: f64 = 1e-8;

/// `T(v, v, …, v)` for a cubical tensor of any order.
pub fn full_contract(t: &DenseTensor, v: &[f64]) -> Result<f64> {
    ensure!(t.is_cubical() && t.dims()[0] == v.len(), Dimension, "vector length {} vs dims {:?}", v.len(), t.dims());
    let d = v.len();
    let mut cur = t.data().to_vec();
    while cur.len() > 1 {
        cur = cur.chunks_exact(d).map(|c| dot(c, v)).collect();
    }
    Ok(cur[0])
}

/// Read a length-d² vector as a d×d matrix, first index slower.
fn as_square(b: &[f64]) -> Matrix {
    let d = (b.len() as f64).sqrt().round() as usize;
    Matrix::new(d, d, b.to_vec()).expect("length is a perfect square")
}

/// Top singular pair of the matricized `b`: `(σ₁, v₁, σ₂/σ₁)`.
fn top_pair(b: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let s = svd(&as_square(b))?;
    let s1 = s.singular_values[0];
    let ratio = if s1 > 0.0 { s.singular_values.get(1).copied().unwrap_or(0.0) / s1 } else { 1.0 };
    let mut v = s.v.col(0);
    let big = v.iter().fold(0.0f64, |m, x| if x.abs() > m.abs() { *x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((s1, v, ratio))
}

/// Least-squares weights of `Σ ω_j v_j^{⊗p}` against `T`; unit `v_j` columns.
pub fn symmetric_weights(t: &DenseTensor, v: &Matrix) -> Result<Vec<f64>> {
    let p = t.order() as i32;
    let k = v.cols();
    let cols = v.columns();
    let g = Matrix::from_fn(k, k, |i, j| dot(&cols[i], &cols[j]).powi(p));
    let rhs: Vec<f64> = cols.iter().map(|c| full_contract(t, c)).collect::<Result<_>>()?;
    Ok(solve_spd(&g, &Matrix::new(k, 1, rhs)?)?.into_data())
}

/// Turn recovered `b_j` vectors into unit `v_j`, fit weights, fold odd-order signs.
fn finish(t: &DenseTensor, bs: &[Vec<f64>], report: &mut DecompositionReport) -> Result<KruskalForm> {
    let d = t.dims()[0];
    let k = bs.len();
    let mut v = Matrix::zeros(d, k);
    for (j, b) in bs.iter().enumerate() {
        let (_, vj, ratio) = top_pair(b)?;
        if ratio > CONTAMINATION {
            report.notes.push(format!("component {}: second singular value is {:.3} of the first", j, ratio));
        }
        v.set_col(j, &vj);
    }
    let mut w = symmetric_weights(t, &v)?;
    if t.order() % 2 == 1 {
        for j in 0..k {
            if w[j] < 0.0 {
                w[j] = -w[j];
                let flipped: Vec<f64> = v.col(j).iter().map(|x| -x).collect();
                v.set_col(j, &flipped);
            }
        }
    }
    let form = KruskalForm::symmetric(w, v, t.order())?;
    let back = kruskal_to_tensor(&form)?;
    report.reconstruction_residual = Some(frobenius_norm(&t.sub(&back)?) / frobenius_norm(t).max(f64::MIN_POSITIVE));
    Ok(form)
}

/// Decompose a symmetric order-6 (power method after whitening) or order-5
/// (simultaneous diagonalization) tensor by reshaping it to order 3 over
/// `ℝ^{d²}`. Returns unit components with fitted weights.
pub fn tensorize_decompose(t: &DenseTensor, k: usize, cfg: &PowerConfig) -> Result<(KruskalForm, DecompositionReport)> {
    ensure!(t.is_cubical() && (t.order() == 5 || t.order() == 6), Dimension, "tensorization needs a cubical order-5 or order-6 tensor, got {:?}", t.dims());
    let d = t.dims()[0];
    ensure!(k >= 1 && k <= d * (d + 1) / 2, Validation, "rank {} exceeds C(d+1,2) = {}", k, d * (d + 1) / 2);
    let d2 = d * d;
    let mut report = DecompositionReport::new("tensorize", k);
    let bs: Vec<Vec<f64>> = if t.order() == 6 {
        let th = t.reshape(&[d2, d2, d2])?;
        let identity: Vec<f64> = Matrix::identity(d).into_data();
        let m = slice_contract(&th, &identity)?;
        let res = decompose_nonorthogonal(&th, &m, k, cfg, ScaleModel::UnitAssumed)?;
        report.iterations = res.report.iterations.clone();
        report.eigen_residuals = res.report.eigen_residuals.clone();
        res.components.columns()
    } else {
        let th = t.reshape(&[d2, d2, d])?;
        let (form, sub) = simdiag(&th, k, &SimdiagConfig::with_seed(cfg.seed))?;
        report.restarts = sub.restarts;
        report.notes.extend(sub.notes);
        form.factors[0].columns()
    };
    let form = finish(t, &bs, &mut report)?;
    Ok((form, report))
}

/// Values of the rank-1 detector `L(A)`, indexed by 4-tuples
/// `(i₁<i₂, j₁<j₂, (i₁,i₂) ≤ (j₁,j₂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1DetectorOutput {
    pub tuples: Vec<[usize; 4]>,
    pub values: Vec<f64>,
}

impl Rank1DetectorOutput {
    pub fn is_zero(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.abs() <= tol)
    }
}

/// The detector's index set; length `C(C(d,2)+1, 2)`.
pub fn detector_tuples(d: usize) -> Vec<[usize; 4]> {
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let mut out = Vec::with_capacity(pairs.len() * (pairs.len() + 1) / 2);
    for (p, &(i1, i2)) in pairs.iter().enumerate() {
        for &(j1, j2) in &pairs[p..] {
            out.push([i1, i2, j1, j2]);
        }
    }
    out
}

/// 2×2 minors of a symmetric matrix.
pub fn rank1_detector(a: &Matrix) -> Result<Rank1DetectorOutput> {
    ensure!(a.rows() == a.cols(), Dimension, "detector needs a square matrix");
    ensure!(a.asymmetry() <= 1e-10, Validation, "detector needs a symmetric matrix (asymmetry {:.3e})", a.asymmetry());
    let tuples = detector_tuples(a.rows());
    let values = tuples
        .iter()
        .map(|&[i1, i2, j1, j2]| a.get(i1, j1) * a.get(i2, j2) - a.get(i1, j2) * a.get(i2, j1))
        .collect();
    Ok(Rank1DetectorOutput { tuples, values })
}

/// Packed symmetric lift `(x_p x_q)_{p ≤ q}`, the coordinates Z acts on.
pub fn sym_lift(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for p in 0..m {
        for q in p..m {
            out.push(x[p] * x[q]);
        }
    }
    out
}

/// Symmetric `m×m` matrix from packed `p ≤ q` coordinates.
pub fn sym_unlift(y: &[f64], m: usize) -> Matrix {
    let mut out = Matrix::zeros(m, m);
    let mut it = y.iter();
    for p in 0..m {
        for q in p..m {
            let v = *it.next().expect("packed length");
            out.set(p, q, v);
            out.set(q, p, v);
        }
    }
    out
}

/// Linearized detector applied to `P ⊗ P`, restricted to symmetric lifts:
/// `Z · sym_lift(x) = L(mat(P x))` for every `x`.
pub fn linearized_detector_matrix(p: &Matrix) -> Result<Matrix> {
    let d2 = p.rows();
    let d = (d2 as f64).sqrt().round() as usize;
    ensure!(d * d == d2, Dimension, "P must have d² rows, got {}", d2);
    let m = p.cols();
    let mats: Vec<Matrix> = p.columns().iter().map(|c| as_square(c)).collect();
    let tuples = detector_tuples(d);
    let width = m * (m + 1) / 2;
    let mut z = Matrix::zeros(tuples.len(), width);
    for (r, &[i1, i2, j1, j2]) in tuples.iter().enumerate() {
        let c = |a: usize, b: usize| mats[a].get(i1, j1) * mats[b].get(i2, j2) - mats[a].get(i1, j2) * mats[b].get(i2, j1);
        let mut col = 0;
        for a in 0..m {
            for b in a..m {
                z.set(r, col, if a == b { c(a, a) } else { c(a, b) + c(b, a) });
                col += 1;
            }
        }
    }
    Ok(z)
}

/// Right singular structure of Z, smallest singular values last.
#[derive(Debug, Clone)]
pub struct DetectorSpectrum {
    /// Singular values of Z, descending, padded with zeros to its width.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns, same order.
    pub v: Matrix,
    /// `UD^{1/2}` from the flattening.
    pub p: Matrix,
}

impl DetectorSpectrum {
    /// Count of singular values below `NULL_TOL · σ₁`.
    pub fn null_dim(&self) -> usize {
        let s1 = self.singular_values[0];
        self.singular_values.iter().filter(|&&s| s <= NULL_TOL * s1).count()
    }

    /// σ just above the bottom `k` divided by the largest of the bottom `k`.
    pub fn gap(&self, k: usize) -> f64 {
        let n = self.singular_values.len();
        let above = self.singular_values[n - k - 1];
        let inside = self.singular_values[n - k].max(f64::MIN_POSITIVE);
        above / inside
    }
}

/// Flatten, whiten with the top-k eigenpairs and build Z.
pub fn detector_spectrum(t: &DenseTensor, k: usize) -> Result<DetectorSpectrum> {
    ensure!(t.order() == 4 && t.is_cubical(), Dimension, "FOOBI needs a cubical order-4 tensor, got {:?}", t.dims());
    let d = t.dims()[0];
    ensure!(k >= 1 && k <= d * (d + 1) / 2, Validation, "rank {} exceeds C(d+1,2) = {}", k, d * (d + 1) / 2);
    let m = Matrix::new(d * d, d * d, t.data().to_vec())?;
    let (vals, vecs) = sym_eigen(&m.symmetrized())?;
    ensure!(vals[k - 1] > 0.0, Validation, "flattening has fewer than {} positive eigenvalues", k);
    let p = vecs.take_cols(k).scale_cols(&vals[..k].iter().map(|v| v.sqrt()).collect::<Vec<_>>());
    let z = linearized_detector_matrix(&p)?;
    let width = z.cols();
    // Zero rows leave the right singular structure alone and make V square.
    let padded = if z.rows() < width {
        let mut data = z.into_data();
        data.resize(width * width, 0.0);
        Matrix::new(width, width, data)?
    } else {
        z
    };
    let s = svd(&padded)?;
    Ok(DetectorSpectrum { singular_values: s.singular_values, v: s.v, p })
}

/// FOOBI for symmetric positive-weight order-4 tensors.
pub fn foobi(t: &DenseTensor, k: usize, seed: u64) -> Result<(KruskalForm, DecompositionReport)> {
    let spec = detector_spectrum(t, k)?;
    let mut report = DecompositionReport::new("foobi", k);
    let null = spec.null_dim();
    let n = spec.singular_values.len();
    if null != k {
        let tail: Vec<String> = spec.singular_values[n.saturating_sub(k + 2)..].iter().map(|s| format!("{:.3e}", s)).collect();
        return Err(Error::RankDeficient(format!(
            "detector null space has dimension {} instead of {} (smallest singular values {})",
            null,
            k,
            tail.join(", ")
        )));
    }
    report.notes.push(format!("null-space gap {:.3e}", spec.gap(k)));
    let basis: Vec<Vec<f64>> = (n - k..n).map(|j| spec.v.col(j)).collect();
    let sd = SimdiagConfig::with_seed(seed);
    let mut last = None;
    for draw in 0..=sd.max_redraws {
        let mut g = rng::stream(seed, draw as u32, 7);
        let combo = |g: &mut rng::Stream| {
            let c = rng::normal_vec(g, k);
            let mut y = vec![0.0; basis[0].len()];
            for (cj, b) in c.iter().zip(&basis) {
                y.iter_mut().zip(b).for_each(|(o, v)| *o += cj * v);
            }
            sym_unlift(&y, k)
        };
        let (u, v) = (combo(&mut g), combo(&mut g));
        match joint_eigenvectors(&u, &v, &sd) {
            Ok(q) => {
                let bs: Vec<Vec<f64>> = q.columns().iter().map(|x| spec.p.matvec(x)).collect::<Result<_>>()?;
                report.restarts = Some(draw);
                let form = finish_foobi(t, &bs, &mut report)?;
                return Ok((form, report));
            }
            Err(e @ (Error::EigenCollision(_) | Error::ComplexEigen(_) | Error::RankDeficient(_))) => {
                report.notes.push(format!("draw {}: {}", draw, e));
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::EigenCollision(format!(
        "FOOBI diagonalization failed after {} redraws: {}",
        sd.max_redraws,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Shared eigenvectors of `U V⁻¹`, with collision detection.
fn joint_eigenvectors(u: &Matrix, v: &Matrix, cfg: &SimdiagConfig) -> Result<Matrix> {
    let k = u.rows();
    // U V⁻¹ = (V⁻ᵀ Uᵀ)ᵀ
    let prod = crate::linalg::solve(&v.transpose(), &u.transpose())
        .map_err(|e| Error::RankDeficient(format!("random combination is singular: {}", e)))?
        .transpose();
    let (vals, vecs) = real_eigen(&prod, cfg.imag_tol)?;
    let big = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..k {
        for j in i + 1..k {
            if (vals[i] - vals[j]).abs() <= cfg.collision_tol * big {
                return Err(Error::EigenCollision(format!("eigenvalues {:.6e} and {:.6e} coincide", vals[i], vals[j])));
            }
        }
    }
    Ok(vecs)
}

/// Weights `δ_j²` from the top singular pair of each matricized `b_j`.
fn finish_foobi(t: &DenseTensor, bs: &[Vec<f64>], report: &mut DecompositionReport) -> Result<KruskalForm> {
    let d = t.dims()[0];
    let k = bs.len();
    let mut v = Matrix::zeros(d, k);
    let mut w = Vec::with_capacity(k);
    for (j, b) in bs.iter().enumerate() {
        let (delta, vj, ratio) = top_pair(b)?;
        if ratio > CONTAMINATION {
            report.notes.push(format!("component {}: second singular value is {:.3} of the first", j, ratio));
        }
        v.set_col(j, &vj);
        w.push(delta * delta);
    }
    let form = KruskalForm::symmetric(w, v, 4)?;
    let back = kruskal_to_tensor(&form)?;
    report.reconstruction_residual = Some(frobenius_norm(&t.sub(&back)?) / frobenius_norm(t).max(f64::MIN_POSITIVE));
    Ok(form)
}

/// `M(T)_{i₁i₂i₃i₄} = Σ_i T_{i,i₁,i₂} T_{i,i₃,i₄}`.
pub fn lift_third_order(t: &DenseTensor) -> Result<DenseTensor> {
    ensure!(t.order() == 3 && t.is_cubical(), Dimension, "lifting needs a cubical order-3 tensor, got {:?}", t.dims());
    let d = t.dims()[0];
    let flat = Matrix::new(d, d * d, t.data().to_vec())?;
    let m = flat.t_matmul(&flat)?;
    DenseTensor::new(vec![d; 4], m.into_data())
}

/// `Σ_j ‖a_j‖² a_j^{⊗4}`, the rank-k part of the lifted `Σ_j a_j^{⊗3}`.
pub fn lifted_signal(a: &Matrix) -> Result<DenseTensor> {
    let w: Vec<f64> = a.column_norms().iter().map(|n| n * n).collect();
    crate::tensor::symmetric_tensor(&w, a, 4)
}

/// Largest singular value of the `d²×d²` flattening of an order-4 tensor.
pub fn flattened_spectral_norm(t: &DenseTensor) -> Result<f64> {
    ensure!(t.order() == 4 && t.is_cubical(), Dimension, "expected a cubical order-4 tensor");
    let d = t.dims()[0];
    Ok(svd(&Matrix::new(d * d, d * d, t.data().to_vec())?)?.singular_values[0])
}

/// Columns scaled to unit norm.
pub fn unit_columns(a: &Matrix) -> Matrix {
    Matrix::from_cols(&a.columns().iter().map(|c| normalize(c)).collect::<Vec<_>>()).expect("same shape")
}
