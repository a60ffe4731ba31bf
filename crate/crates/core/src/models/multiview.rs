//! Multi-view mixtures and the hidden Markov model reduction.

use crate::error::{ensure, Error, Result};
use crate::linalg::{self, svd};
use crate::matrix_methods::pseudo_inverse;
use crate::stream::{empirical_tensor, TripleSampleBatch};
use crate::tensor::{multilinear, symmetric_tensor, DenseTensor, Matrix};

use super::sample::one_hot_views;
use super::spec::{HmmSpec, MultiviewSpec};
use super::{weighted_gram, Family, MomentSet};

/// Cross moments of three views.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewRaw {
    /// `E[x₁⊗x₂]`
    pub e12: Matrix,
    /// `E[x₁⊗x₃]`
    pub e13: Matrix,
    /// `E[x₂⊗x₃]`
    pub e23: Matrix,
    /// `E[x₁⊗x₂⊗x₃]`
    pub e123: DenseTensor,
}

impl MultiviewRaw {
    pub fn from_batch(batch: &TripleSampleBatch) -> Result<Self> {
        let n = batch.n() as f64;
        let cross = |a: usize, b: usize| batch.view(a).t_matmul(batch.view(b)).map(|m| m.scale(1.0 / n));
        Ok(Self { e12: cross(0, 1)?, e13: cross(0, 2)?, e23: cross(1, 2)?, e123: empirical_tensor(batch) })
    }
}

/// Rank-`k` pseudo-inverse; fails when the `k`-th singular value vanishes.
fn pinv_rank(m: &Matrix, k: usize, what: &str) -> Result<Matrix> {
    let r = m.rows().min(m.cols());
    ensure!(k >= 1 && k <= r, Validation, "rank {} out of range for {} of shape {:?}", k, what, m.shape());
    let s = svd(m)?.truncate(k);
    let (s1, sk) = (s.singular_values[0], s.singular_values[k - 1]);
    if !(sk > 1e-12 * s1) {
        return Err(Error::RankDeficient(format!("{} is singular at rank {} (σ_k = {:.3e}, σ₁ = {:.3e})", what, k, sk, s1)));
    }
    let inv: Vec<f64> = s.singular_values.iter().map(|x| 1.0 / x).collect();
    s.v.scale_cols(&inv).matmul(&s.u.transpose())
}

/// Symmetrized multi-view moments and the transforms that produced them.
#[derive(Debug, Clone)]
pub struct MultiviewMoments {
    pub moments: MomentSet,
    /// `E[x₃⊗x₂] E[x₁⊗x₂]⁺`, mapping view 1 into view 3.
    pub a1: Matrix,
    /// `E[x₃⊗x₁] E[x₂⊗x₁]⁺`, mapping view 2 into view 3.
    pub a2: Matrix,
}

/// Maps views 1 and 2 into view 3 so that `M₂ = E[x̃₁⊗x̃₂]` and
/// `M₃ = E[x̃₁⊗x̃₂⊗x₃]` become `Σ w_j μ_{3,j}^{⊗2,3}`. Inverses are taken at
/// rank `k`, which also covers views wider than `k`.
pub fn multiview_from_raw(raw: &MultiviewRaw, k: usize) -> Result<MultiviewMoments> {
    let a1 = raw.e23.transpose().matmul(&pinv_rank(&raw.e12, k, "E[x1⊗x2]")?)?;
    let a2 = raw.e13.transpose().matmul(&pinv_rank(&raw.e12.transpose(), k, "E[x2⊗x1]")?)?;
    let m2 = a1.matmul(&raw.e12)?.matmul(&a2.transpose())?;
    let d3 = m2.rows();
    let m3 = multilinear(&raw.e123, &a1.transpose(), &a2.transpose(), &Matrix::identity(d3))?;
    let mut moments = MomentSet::new(Family::Multiview, m2);
    moments.m3 = Some(m3);
    moments.k = Some(k);
    Ok(MultiviewMoments { moments, a1, a2 })
}

pub fn multiview_symmetrized_moments(batch: &TripleSampleBatch, k: usize) -> Result<MultiviewMoments> {
    multiview_from_raw(&MultiviewRaw::from_batch(batch)?, k)
}

/// `Σ w_j μ_{3,j}^{⊗2}` and `Σ w_j μ_{3,j}^{⊗3}`.
pub fn multiview_population_moments(spec: &MultiviewSpec) -> Result<MomentSet> {
    spec.validate()?;
    let mu3 = spec.view_means(2);
    let mut ms = MomentSet::new(Family::Multiview, weighted_gram(&spec.weights, &mu3));
    ms.m3 = Some(symmetric_tensor(&spec.weights, &mu3, 3)?);
    ms.k = Some(spec.k());
    Ok(ms)
}

/// Conditional means of another view from its cross moment with view 3:
/// `E[x_t⊗x₃] = M_t diag(w) M₃ᵀ`, so `M_t = E[x_t⊗x₃] (M₃ᵀ)⁺ diag(w)⁻¹`.
pub fn view_means(e_t3: &Matrix, mu3: &Matrix, w: &[f64]) -> Result<Matrix> {
    ensure!(mu3.cols() == w.len(), Dimension, "{} means but {} weights", mu3.cols(), w.len());
    ensure!(w.iter().all(|&x| x != 0.0), Numerical, "zero mixing weight");
    let inv_w: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    Ok(e_t3.matmul(&pseudo_inverse(&mu3.transpose())?)?.scale_cols(&inv_w))
}

/// HMM moments with the middle hidden state as the mixture label.
#[derive(Debug, Clone)]
pub struct HmmReduction {
    pub multiview: MultiviewMoments,
    pub raw: MultiviewRaw,
}

/// One-hot views of the first three observations of each sequence.
pub fn hmm_reduce(seqs: &[Vec<usize>], d: usize, k: usize) -> Result<HmmReduction> {
    let raw = MultiviewRaw::from_batch(&one_hot_views(seqs, d, [0, 1, 2])?)?;
    let mut multiview = multiview_from_raw(&raw, k)?;
    multiview.moments.family = Family::Hmm;
    Ok(HmmReduction { multiview, raw })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmEstimate {
    pub initial: Vec<f64>,
    pub transition: Matrix,
    pub emission: Matrix,
    /// Distribution of the middle state, `Tπ`.
    pub hidden_weights: Vec<f64>,
}

/// Turns recovered view-3 means `OT` and weights `w = Tπ` into `(π, T, O)`.
pub fn hmm_postprocess(raw: &MultiviewRaw, mu3: &Matrix, w: &[f64]) -> Result<HmmEstimate> {
    let emission = view_means(&raw.e23, mu3, w)?;
    let transition = pseudo_inverse(&emission)?.matmul(mu3)?;
    let k = w.len();
    let rhs = Matrix::new(k, 1, w.to_vec())?;
    let initial = linalg::solve(&transition, &rhs)
        .map_err(|e| Error::Numerical(format!("transition estimate is singular: {}", e)))?
        .into_data();
    Ok(HmmEstimate { initial, transition, emission, hidden_weights: w.to_vec() })
}

/// Conditional means of `x₁, x₂, x₃` given the middle state:
/// `O diag(π) Tᵀ diag(w)⁻¹`, `O`, and `OT`.
pub fn hmm_view_means(spec: &HmmSpec) -> Result<[Matrix; 3]> {
    spec.validate()?;
    let o = spec.emission_matrix();
    let t = spec.transition_matrix();
    let w = spec.hidden_weights();
    ensure!(w.iter().all(|&x| x > 0.0), Validation, "middle state has zero-probability values");
    let inv_w: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let first = o.scale_cols(&spec.initial).matmul(&t.transpose())?.scale_cols(&inv_w);
    let third = o.matmul(&t)?;
    Ok([first, o, third])
}

/// Multi-view targets for an HMM: weights `Tπ`, components `OT`.
pub fn hmm_population_moments(spec: &HmmSpec) -> Result<MomentSet> {
    let [_, _, mu3] = hmm_view_means(spec)?;
    let w = spec.hidden_weights();
    let mut ms = MomentSet::new(Family::Hmm, weighted_gram(&w, &mu3));
    ms.m3 = Some(symmetric_tensor(&w, &mu3, 3)?);
    ms.k = Some(spec.k());
    Ok(ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample::{sample_hmm, sample_multiview};
    use crate::rng::{normal, stream};

    /// Cross moments of a finite mixture of product distributions:
    /// `Σ_j w_j μ_{a,j}⊗μ_{b,j}` and the triple analogue.
    fn mixture_raw_oracle(w: &[f64], views: [&Matrix; 3]) -> MultiviewRaw {
        let pair = |a: &Matrix, b: &Matrix| {
            Matrix::from_fn(a.rows(), b.rows(), |p, q| (0..w.len()).map(|j| w[j] * a.get(p, j) * b.get(q, j)).sum())
        };
        let [m1, m2, m3] = views;
        let e123 = DenseTensor::from_fn(&[m1.rows(), m2.rows(), m3.rows()], |ix| {
            (0..w.len()).map(|j| w[j] * m1.get(ix[0], j) * m2.get(ix[1], j) * m3.get(ix[2], j)).sum()
        });
        MultiviewRaw { e12: pair(m1, m2), e13: pair(m1, m3), e23: pair(m2, m3), e123 }
    }

    fn gaussian_views(d: usize, k: usize, seed: u64) -> [Vec<Vec<f64>>; 3] {
        let mut rng = stream(seed, 0, 0);
        let mut view = || (0..k).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
        [view(), view(), view()]
    }

    #[test]
    fn identical_views_give_identity_transforms() {
        let mu = Matrix::from_cols(&[vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8], vec![0.3, 0.6, 0.1]]).unwrap();
        let w = [0.2, 0.5, 0.3];
        let raw = mixture_raw_oracle(&w, [&mu, &mu, &mu]);
        let mv = multiview_from_raw(&raw, 3).unwrap();
        assert!(mv.a1.max_abs_diff(&Matrix::identity(3)) < 1e-10);
        assert!(mv.a2.max_abs_diff(&Matrix::identity(3)) < 1e-10);
        assert!(mv.moments.m3.unwrap().max_abs_diff(&symmetric_tensor(&w, &mu, 3).unwrap()) < 1e-12);
    }

    #[test]
    fn distinct_views_identity() {
        let spec = MultiviewSpec { weights: vec![0.1, 0.2, 0.3, 0.4], views: gaussian_views(4, 4, 3), noise: 0.5 };
        let vm: Vec<Matrix> = (0..3).map(|t| spec.view_means(t)).collect();
        let raw = mixture_raw_oracle(&spec.weights, [&vm[0], &vm[1], &vm[2]]);
        let got = multiview_from_raw(&raw, 4).unwrap().moments;
        let want = multiview_population_moments(&spec).unwrap();
        assert!(got.m2.max_abs_diff(&want.m2) < 1e-10);
        assert!(got.m3.unwrap().max_abs_diff(want.m3.as_ref().unwrap()) < 1e-10);
        let m1 = view_means(&raw.e13, &vm[2], &spec.weights).unwrap();
        assert!(m1.max_abs_diff(&vm[0]) < 1e-10);
    }

    #[test]
    fn wide_views_use_rank_k_inverse() {
        let spec = MultiviewSpec { weights: vec![0.5, 0.5], views: gaussian_views(5, 2, 4), noise: 0.0 };
        let vm: Vec<Matrix> = (0..3).map(|t| spec.view_means(t)).collect();
        let raw = mixture_raw_oracle(&spec.weights, [&vm[0], &vm[1], &vm[2]]);
        let got = multiview_from_raw(&raw, 2).unwrap().moments;
        let want = multiview_population_moments(&spec).unwrap();
        assert!(got.m3.unwrap().max_abs_diff(want.m3.as_ref().unwrap()) < 1e-10);
        assert!(matches!(multiview_from_raw(&raw, 3), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn sampled_multiview_moments_converge() {
        let spec = MultiviewSpec { weights: vec![0.4, 0.6], views: gaussian_views(3, 2, 5), noise: 0.3 };
        let (batch, _) = sample_multiview(&spec, 100_000, 6).unwrap();
        let got = multiview_symmetrized_moments(&batch, 2).unwrap().moments;
        let want = multiview_population_moments(&spec).unwrap();
        let rel = got.m2.max_abs_diff(&want.m2) / want.m2.frobenius();
        assert!(rel < 0.05, "relative M2 error {}", rel);
    }

    fn small_hmm() -> HmmSpec {
        HmmSpec {
            initial: vec![0.6, 0.4],
            transition: vec![vec![0.7, 0.3], vec![0.2, 0.8]],
            emission: vec![vec![0.5, 0.3, 0.1, 0.1], vec![0.05, 0.15, 0.3, 0.5]],
            length: 3,
        }
    }

    /// Joint law of `(x₁, x₂, x₃)` by summing over all hidden paths.
    fn hmm_raw_oracle(spec: &HmmSpec) -> MultiviewRaw {
        let (k, d) = (spec.k(), spec.d());
        let (t, o) = (&spec.transition, &spec.emission);
        let mut e123 = DenseTensor::zeros(&[d, d, d]);
        for y1 in 0..k {
            for y2 in 0..k {
                for y3 in 0..k {
                    let p = spec.initial[y1] * t[y1][y2] * t[y2][y3];
                    for a in 0..d {
                        for b in 0..d {
                            for c in 0..d {
                                let cur = e123.get(&[a, b, c]);
                                e123.set(&[a, b, c], cur + p * o[y1][a] * o[y2][b] * o[y3][c]);
                            }
                        }
                    }
                }
            }
        }
        // pairwise marginals of the joint
        let marg = |keep: [usize; 2]| {
            Matrix::from_fn(d, d, |p, q| {
                let mut s = 0.0;
                for r in 0..d {
                    let mut ix = [0; 3];
                    ix[keep[0]] = p;
                    ix[keep[1]] = q;
                    ix[3 - keep[0] - keep[1]] = r;
                    s += e123.get(&ix);
                }
                s
            })
        };
        MultiviewRaw { e12: marg([0, 1]), e13: marg([0, 2]), e23: marg([1, 2]), e123 }
    }

    #[test]
    fn hmm_examples() {
        let spec = HmmSpec {
            initial: vec![1.0, 0.0],
            transition: vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            emission: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            length: 3,
        };
        assert_eq!(spec.hidden_weights(), vec![0.5, 0.5]);
        let still = HmmSpec { transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]], ..small_hmm() };
        let [_, v2, v3] = hmm_view_means(&still).unwrap();
        assert!(v2.max_abs_diff(&v3) < 1e-15);
    }

    #[test]
    fn hmm_identity_and_postprocess() {
        let spec = small_hmm();
        let raw = hmm_raw_oracle(&spec);
        let views = hmm_view_means(&spec).unwrap();
        let w = spec.hidden_weights();
        let oracle = mixture_raw_oracle(&w, [&views[0], &views[1], &views[2]]);
        assert!(raw.e123.max_abs_diff(&oracle.e123) < 1e-12);
        let got = multiview_from_raw(&raw, 2).unwrap().moments;
        let want = hmm_population_moments(&spec).unwrap();
        assert!(got.m2.max_abs_diff(&want.m2) < 1e-10);
        assert!(got.m3.unwrap().max_abs_diff(want.m3.as_ref().unwrap()) < 1e-10);
        let est = hmm_postprocess(&raw, &views[2], &w).unwrap();
        assert!(est.emission.max_abs_diff(&spec.emission_matrix()) < 1e-10);
        assert!(est.transition.max_abs_diff(&spec.transition_matrix()) < 1e-10);
        assert!(est.initial.iter().zip(&spec.initial).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn hmm_reduce_from_samples() {
        let spec = small_hmm();
        let (seqs, _) = sample_hmm(&spec, 50_000, 3).unwrap();
        let red = hmm_reduce(&seqs, 4, 2).unwrap();
        let want = hmm_population_moments(&spec).unwrap();
        assert_eq!(red.multiview.moments.family, Family::Hmm);
        assert!(red.multiview.moments.m2.max_abs_diff(&want.m2) < 0.02);
    }
}
