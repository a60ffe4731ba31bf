//! Spherical Gaussian mixtures and independent component analysis.

use crate::error::{ensure, Result};
use crate::linalg::sym_eigen;
use crate::rng::{orthogonal, stream};
use crate::stream::TripleSampleBatch;
use crate::tensor::{symmetric_tensor, DenseTensor, Matrix};

use super::spec::{GmmSpec, IcaSpec};
use super::{identity_correction, weighted_gram, Family, MomentSet, RawMoments};

/// Smallest covariance eigenvalue and a unit eigenvector for it.
fn smallest_eigen(cov: &Matrix) -> Result<(f64, Vec<f64>)> {
    let (vals, vecs) = sym_eigen(cov)?;
    let last = vals.len() - 1;
    Ok((vals[last], vecs.col(last)))
}

/// Common-variance reduction: `M₂ = E[x⊗x] − σ²I` and
/// `M₃ = E[x⊗x⊗x] − σ² Σ_i (E[x]⊗e_i⊗e_i + …)` with `σ²` the smallest
/// covariance eigenvalue.
pub fn gmm_common_from_raw(raw: &RawMoments) -> Result<MomentSet> {
    let d = raw.d();
    let (s2, _) = smallest_eigen(&raw.covariance())?;
    let m2 = raw.m2.sub(&Matrix::identity(d).scale(s2))?;
    let m3 = raw.m3.sub(&identity_correction(&raw.m1).scale(s2))?;
    let mut ms = MomentSet::new(Family::Gmm, m2);
    ms.m1 = Some(raw.m1.clone());
    ms.m3 = Some(m3);
    ms.sigma2 = Some(s2);
    Ok(ms)
}

/// Sample version of [`gmm_common_from_raw`]. `σ̂²` is biased low at finite `n`.
pub fn gmm_common_moments(samples: &Matrix) -> Result<MomentSet> {
    ensure!(samples.rows() >= 2, Validation, "need at least 2 samples, got {}", samples.rows());
    gmm_common_from_raw(&RawMoments::from_samples(samples)?)
}

/// Differing-variance reduction with `M₁ = E[⟨v, x − E x⟩² x]`, where `v`
/// is a unit eigenvector of the smallest covariance eigenvalue `σ̄²`.
pub fn gmm_differing_from_raw(raw: &RawMoments) -> Result<MomentSet> {
    let d = raw.d();
    let (s2, v) = smallest_eigen(&raw.covariance())?;
    // E[(vᵀx)² x] − 2(vᵀm) E[x xᵀ] v + (vᵀm)² m
    let vm: f64 = v.iter().zip(&raw.m1).map(|(a, b)| a * b).sum();
    let vvx = crate::tensor::contract_uvi(&raw.m3, &v, &v)?;
    let m2v = raw.m2.matvec(&v)?;
    let m1: Vec<f64> = (0..d).map(|i| vvx[i] - 2.0 * vm * m2v[i] + vm * vm * raw.m1[i]).collect();
    let m2 = raw.m2.sub(&Matrix::identity(d).scale(s2))?;
    let m3 = raw.m3.sub(&identity_correction(&m1))?;
    let mut ms = MomentSet::new(Family::GmmDiff, m2);
    ms.m1 = Some(m1);
    ms.m3 = Some(m3);
    ms.sigma2 = Some(s2);
    Ok(ms)
}

pub fn gmm_differing_moments(samples: &Matrix) -> Result<MomentSet> {
    ensure!(samples.rows() >= 2, Validation, "need at least 2 samples, got {}", samples.rows());
    gmm_differing_from_raw(&RawMoments::from_samples(samples)?)
}

/// Target moments `Σ w_j μ_j^{⊗2,3}`. For differing variances `M₁` is
/// `Σ w_j σ_j² μ_j`, otherwise `E[x]`.
pub fn gmm_population_moments(spec: &GmmSpec) -> Result<MomentSet> {
    spec.validate()?;
    let mu = spec.mean_matrix();
    let differing = spec.sigma.len() > 1 && spec.sigma.iter().any(|&s| s != spec.sigma[0]);
    let family = if differing { Family::GmmDiff } else { Family::Gmm };
    let mut ms = MomentSet::new(family, weighted_gram(&spec.weights, &mu));
    ms.m3 = Some(symmetric_tensor(&spec.weights, &mu, 3)?);
    let s2: Vec<f64> = (0..spec.k()).map(|j| spec.sigma_of(j).powi(2)).collect();
    let m1_weights: Vec<f64> = if differing {
        spec.weights.iter().zip(&s2).map(|(w, s)| w * s).collect()
    } else {
        spec.weights.clone()
    };
    ms.m1 = Some(mu.matvec(&m1_weights)?);
    ms.sigma2 = Some(spec.weights.iter().zip(&s2).map(|(w, s)| w * s).sum());
    ms.k = Some(spec.k());
    Ok(ms)
}

/// Three views of rotated samples with the rotation used.
#[derive(Debug, Clone)]
pub struct ViewSplit {
    pub batch: TripleSampleBatch,
    pub rotation: Matrix,
    /// Coordinate counts per view; they sum to `d`.
    pub sizes: [usize; 3],
}

impl ViewSplit {
    /// Maps per-view means (stacked by view) back to the original coordinates.
    pub fn unsplit(&self, views: [&Matrix; 3]) -> Result<Matrix> {
        let k = views[0].cols();
        let d = self.rotation.rows();
        let mut stacked = Matrix::zeros(d, k);
        let mut off = 0;
        for (t, v) in views.iter().enumerate() {
            ensure!(v.rows() == self.sizes[t] && v.cols() == k, Dimension, "view {} means have shape {:?}", t, v.shape());
            for i in 0..v.rows() {
                for j in 0..k {
                    stacked.set(off + i, j, v.get(i, j));
                }
            }
            off += v.rows();
        }
        self.rotation.t_matmul(&stacked)
    }
}

/// Applies a Haar rotation and cuts the coordinates into three groups.
pub fn gmm_multiview_split(samples: &Matrix, seed: u64) -> Result<ViewSplit> {
    let (n, d) = samples.shape();
    ensure!(d >= 3, Validation, "need at least 3 coordinates to form three views, got {}", d);
    let rotation = orthogonal(&mut stream(seed, 0, 11), d);
    let rotated = samples.matmul(&rotation.transpose())?;
    let base = d / 3;
    let sizes = [base + usize::from(d % 3 > 0), base + usize::from(d % 3 > 1), base];
    let mut off = 0;
    let mut views = Vec::with_capacity(3);
    for s in sizes {
        views.push(Matrix::from_fn(n, s, |i, j| rotated.get(i, off + j)));
        off += s;
    }
    let [a, b, c]: [Matrix; 3] = views.try_into().expect("three views");
    Ok(ViewSplit { batch: TripleSampleBatch::new(a, b, c)?, rotation, sizes })
}

/// `(1/n) Σ x^{⊗4}` over the rows of `x`.
pub fn fourth_moment(x: &Matrix) -> DenseTensor {
    let (n, d) = x.shape();
    let d2 = d * d;
    let mut acc = vec![0.0; d2 * d2];
    let mut xx = vec![0.0; d2];
    for i in 0..n {
        let r = x.row(i);
        for a in 0..d {
            for b in 0..d {
                xx[a * d + b] = r[a] * r[b];
            }
        }
        for (p, &u) in xx.iter().enumerate() {
            let row = &mut acc[p * d2..(p + 1) * d2];
            row.iter_mut().zip(&xx).for_each(|(o, &v)| *o += u * v);
        }
    }
    acc.iter_mut().for_each(|v| *v /= n as f64);
    DenseTensor::new(vec![d, d, d, d], acc).expect("d⁴ entries")
}

/// Fourth cumulant `E[x^{⊗4}] − T` with `T` the three pairings of `E[x⊗x]`.
/// Assumes zero-mean observations.
pub fn ica_from_raw(m2: &Matrix, m4: &DenseTensor) -> Result<MomentSet> {
    let d = m2.rows();
    ensure!(m4.dims() == [d, d, d, d], Dimension, "fourth moment has dims {:?}, expected {}⁴", m4.dims(), d);
    let c = DenseTensor::from_fn(&[d, d, d, d], |ix| {
        let (a, b, e, f) = (ix[0], ix[1], ix[2], ix[3]);
        let t = m2.get(a, b) * m2.get(e, f) + m2.get(a, e) * m2.get(b, f) + m2.get(a, f) * m2.get(b, e);
        m4.get(ix) - t
    });
    let mut ms = MomentSet::new(Family::Ica, m2.clone());
    ms.m4 = Some(c);
    Ok(ms)
}

pub fn ica_cumulant(samples: &Matrix) -> Result<MomentSet> {
    ensure!(samples.rows() >= 2, Validation, "need at least 2 samples, got {}", samples.rows());
    let m2 = crate::matrix_methods::second_moment(samples);
    ica_from_raw(&m2, &fourth_moment(samples))
}

/// `Σ κ_j μ_j^{⊗4}` with `M₂ = E[x xᵀ] = A Aᵀ + σ²I`.
pub fn ica_population_moments(spec: &IcaSpec) -> Result<MomentSet> {
    spec.validate()?;
    let a = spec.mixing_matrix();
    let d = spec.d();
    let m2 = a.matmul(&a.transpose())?.add(&Matrix::identity(d).scale(spec.noise * spec.noise))?;
    let mut ms = MomentSet::new(Family::Ica, m2);
    ms.m4 = Some(symmetric_tensor(&spec.kurtoses(), &a, 4)?);
    ms.k = Some(spec.k());
    Ok(ms)
}

/// `M₄(I, I, u, v) = Σ κ_j ⟨μ_j,u⟩⟨μ_j,v⟩ μ_j μ_jᵀ`.
pub fn cumulant_matrix(m4: &DenseTensor, u: &[f64], v: &[f64]) -> Result<Matrix> {
    let d = m4.dims()[0];
    ensure!(m4.order() == 4 && u.len() == d && v.len() == d, Dimension, "contraction of {:?} with vectors of length {}, {}", m4.dims(), u.len(), v.len());
    let uv: Vec<f64> = (0..d * d).map(|p| u[p / d] * v[p % d]).collect();
    let flat = m4.data();
    Ok(Matrix::from_fn(d, d, |a, b| {
        let row = &flat[(a * d + b) * d * d..(a * d + b + 1) * d * d];
        row.iter().zip(&uv).map(|(x, y)| x * y).sum()
    }))
}

/// `M₄(I, I, I, v) = Σ κ_j ⟨μ_j,v⟩ μ_j^{⊗3}`.
pub fn cumulant_tensor(m4: &DenseTensor, v: &[f64]) -> Result<DenseTensor> {
    let d = m4.dims()[0];
    ensure!(m4.order() == 4 && v.len() == d, Dimension, "contraction of {:?} with a vector of length {}", m4.dims(), v.len());
    let data = m4.data().chunks_exact(d).map(|c| c.iter().zip(v).map(|(x, y)| x * y).sum()).collect();
    DenseTensor::new(vec![d, d, d], data)
}
