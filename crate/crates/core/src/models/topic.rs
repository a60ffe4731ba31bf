//! Single topic model and latent Dirichlet allocation.

use crate::error::{ensure, Result};
use crate::tensor::{symmetric_tensor, DenseTensor, Matrix};

use super::spec::{LdaSpec, TopicSpec};
use super::{weighted_gram, Family, MomentSet};

/// Word co-occurrence frequencies at three fixed positions of each document.
#[derive(Debug, Clone, PartialEq)]
pub struct WordMoments {
    /// `E[x₁]`
    pub m1: Vec<f64>,
    /// `E[x₁⊗x₂]`
    pub m2: Matrix,
    /// `E[x₁⊗x₂⊗x₃]`
    pub m3: DenseTensor,
}

impl WordMoments {
    pub fn from_docs(docs: &[Vec<usize>], d: usize, positions: [usize; 3]) -> Result<Self> {
        ensure!(!docs.is_empty(), Validation, "empty corpus");
        let need = positions.iter().max().unwrap() + 1;
        let mut c1 = vec![0u64; d];
        let mut c2 = vec![0u64; d * d];
        let mut c3 = vec![0u64; d * d * d];
        for (i, doc) in docs.iter().enumerate() {
            ensure!(doc.len() >= need.max(3), Validation, "document {} has {} words, need at least {}", i, doc.len(), need.max(3));
            let [a, b, c] = positions.map(|p| doc[p]);
            ensure!(a < d && b < d && c < d, Validation, "document {} has a word outside the vocabulary of {}", i, d);
            c1[a] += 1;
            c2[a * d + b] += 1;
            c3[(a * d + b) * d + c] += 1;
        }
        let n = docs.len() as f64;
        let f = |c: Vec<u64>| c.into_iter().map(|x| x as f64 / n).collect::<Vec<_>>();
        Ok(Self {
            m1: f(c1),
            m2: Matrix::new(d, d, f(c2))?,
            m3: DenseTensor::new(vec![d, d, d], f(c3))?,
        })
    }
}

/// `Σ w_j μ_j^{⊗2}` and `Σ w_j μ_j^{⊗3}` with `M₁ = Σ w_j μ_j`.
pub fn topic_population_moments(spec: &TopicSpec) -> Result<MomentSet> {
    spec.validate()?;
    let mu = spec.topic_matrix();
    let mut ms = MomentSet::new(Family::Topic, weighted_gram(&spec.weights, &mu));
    ms.m1 = Some(mu.matvec(&spec.weights)?);
    ms.m3 = Some(symmetric_tensor(&spec.weights, &mu, 3)?);
    ms.k = Some(spec.k());
    Ok(ms)
}

/// Frequencies of the first three words. For exchangeable documents these
/// are already the target moments.
pub fn topic_empirical_moments(docs: &[Vec<usize>], d: usize) -> Result<MomentSet> {
    topic_empirical_moments_at(docs, d, [0, 1, 2])
}

/// As [`topic_empirical_moments`] but reading words at `positions`.
pub fn topic_empirical_moments_at(docs: &[Vec<usize>], d: usize, positions: [usize; 3]) -> Result<MomentSet> {
    let w = WordMoments::from_docs(docs, d, positions)?;
    let mut ms = MomentSet::new(Family::Topic, w.m2);
    ms.m1 = Some(w.m1);
    ms.m3 = Some(w.m3);
    Ok(ms)
}

/// `Σ α_j/((α₀+1)α₀) μ_j^{⊗2}` and `Σ 2α_j/((α₀+2)(α₀+1)α₀) μ_j^{⊗3}`.
pub fn lda_population_moments(spec: &LdaSpec) -> Result<MomentSet> {
    spec.validate()?;
    let a0 = spec.alpha0();
    let mu = spec.topic_matrix();
    let w2: Vec<f64> = spec.alpha.iter().map(|a| a / ((a0 + 1.0) * a0)).collect();
    let w3: Vec<f64> = spec.alpha.iter().map(|a| 2.0 * a / ((a0 + 2.0) * (a0 + 1.0) * a0)).collect();
    let mut ms = MomentSet::new(Family::Lda, weighted_gram(&w2, &mu));
    ms.m1 = Some(mu.matvec(&spec.alpha.iter().map(|a| a / a0).collect::<Vec<_>>())?);
    ms.m3 = Some(symmetric_tensor(&w3, &mu, 3)?);
    ms.k = Some(spec.k());
    ms.alpha0 = Some(a0);
    Ok(ms)
}

/// Dirichlet corrections applied to raw word moments.
pub fn lda_from_raw(alpha0: f64, raw: &WordMoments) -> Result<MomentSet> {
    ensure!(alpha0.is_finite() && alpha0 > 0.0, Validation, "alpha0 must be positive, got {}", alpha0);
    let d = raw.m1.len();
    let m1 = &raw.m1;
    let e12 = &raw.m2;
    let m2 = Matrix::from_fn(d, d, |i, j| e12.get(i, j) - alpha0 / (alpha0 + 1.0) * m1[i] * m1[j]);
    let c1 = alpha0 / (alpha0 + 2.0);
    let c2 = 2.0 * alpha0 * alpha0 / ((alpha0 + 2.0) * (alpha0 + 1.0));
    let m3 = DenseTensor::from_fn(&[d, d, d], |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        let cross = e12.get(a, b) * m1[c] + e12.get(a, c) * m1[b] + m1[a] * e12.get(b, c);
        raw.m3.get(ix) - c1 * cross + c2 * m1[a] * m1[b] * m1[c]
    });
    let mut ms = MomentSet::new(Family::Lda, m2);
    ms.m1 = Some(m1.clone());
    ms.m3 = Some(m3);
    ms.alpha0 = Some(alpha0);
    Ok(ms)
}

pub fn lda_moments(docs: &[Vec<usize>], d: usize, alpha0: f64) -> Result<MomentSet> {
    ensure!(alpha0.is_finite() && alpha0 > 0.0, Validation, "alpha0 must be positive, got {}", alpha0);
    lda_from_raw(alpha0, &WordMoments::from_docs(docs, d, [0, 1, 2])?)
}

/// Recovers `α` from the scale-free components of an LDA decomposition.
///
/// `components` are `√λ̃_j μ_j` for the second-moment weights
/// `λ̃_j = α_j/((α₀+1)α₀)`; since `μ_j` sums to one, `λ̃_j` is the squared
/// column sum.
pub fn lda_alpha_from_components(components: &Matrix, alpha0: f64) -> Vec<f64> {
    (0..components.cols())
        .map(|j| {
            let s: f64 = components.col(j).iter().sum();
            s * s * (alpha0 + 1.0) * alpha0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample::{sample_lda, sample_topic};
    use crate::rng::{dirichlet, stream};

    fn random_topics(d: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream(seed, 0, 0);
        (0..k).map(|_| dirichlet(&mut rng, &vec![1.0; d])).collect()
    }

    fn fix_sum(mut v: Vec<f64>) -> Vec<f64> {
        let s: f64 = v[1..].iter().sum();
        v[0] = 1.0 - s;
        v
    }

    #[test]
    fn topic_examples() {
        let mu = vec![0.2, 0.3, 0.5];
        let one = TopicSpec { weights: vec![1.0], topics: vec![mu.clone()], words: 3 };
        let ms = topic_population_moments(&one).unwrap();
        let t = ms.m3.unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert!((t.get(&[a, b, c]) - mu[a] * mu[b] * mu[c]).abs() < 1e-15);
                }
            }
        }
        let two = TopicSpec { weights: vec![0.5, 0.5], topics: vec![vec![1.0, 0.0], vec![0.0, 1.0]], words: 3 };
        let m2 = topic_population_moments(&two).unwrap().m2;
        assert_eq!(m2.data(), &[0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn topic_population_matches_enumeration() {
        let (d, k) = (5, 3);
        let spec = TopicSpec { weights: vec![0.2, 0.3, 0.5], topics: random_topics(d, k, 1).into_iter().map(fix_sum).collect(), words: 3 };
        // joint law of (h, w1, w2, w3) summed into one-hot outer products
        let mut oracle = vec![0.0; d * d * d];
        let mut pair = vec![0.0; d * d];
        for h in 0..k {
            let m = &spec.topics[h];
            for a in 0..d {
                for b in 0..d {
                    pair[a * d + b] += spec.weights[h] * m[a] * m[b];
                    for c in 0..d {
                        oracle[(a * d + b) * d + c] += spec.weights[h] * m[a] * m[b] * m[c];
                    }
                }
            }
        }
        let ms = topic_population_moments(&spec).unwrap();
        let m3 = ms.m3.as_ref().unwrap();
        assert!(m3.data().iter().zip(&oracle).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(ms.m2.data().iter().zip(&pair).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(m3.asymmetry() < 1e-15 && ms.m2.asymmetry() < 1e-15);
    }

    #[test]
    fn topic_empirical_converges() {
        let (d, k) = (10, 3);
        let spec = TopicSpec { weights: vec![0.3, 0.3, 0.4], topics: random_topics(d, k, 4).into_iter().map(fix_sum).collect(), words: 3 };
        let pop = topic_population_moments(&spec).unwrap().m3.unwrap();
        let docs = sample_topic(&spec, 100_000, 5).unwrap();
        let emp = topic_empirical_moments(&docs, d).unwrap().m3.unwrap();
        let err = crate::tensor::frobenius_norm(&emp.sub(&pop).unwrap());
        assert!(err <= 0.02, "‖M̂₃ − M₃‖ = {}", err);
    }

    #[test]
    fn exchangeable_positions_agree() {
        let (d, k) = (6, 2);
        let spec = TopicSpec { weights: vec![0.4, 0.6], topics: random_topics(d, k, 8).into_iter().map(fix_sum).collect(), words: 6 };
        let docs = sample_topic(&spec, 50_000, 9).unwrap();
        let a = topic_empirical_moments_at(&docs, d, [0, 1, 2]).unwrap().m3.unwrap();
        let b = topic_empirical_moments_at(&docs, d, [4, 5, 3]).unwrap().m3.unwrap();
        let diff = crate::tensor::frobenius_norm(&a.sub(&b).unwrap());
        assert!(diff < 0.02, "position choices differ by {}", diff);
    }

    #[test]
    fn corpus_errors() {
        assert!(topic_empirical_moments(&[], 3).unwrap_err().is_validation());
        assert!(topic_empirical_moments(&[vec![0, 1]], 3).unwrap_err().is_validation());
        assert!(lda_moments(&[vec![0, 1, 2]], 3, 0.0).unwrap_err().is_validation());
    }

    fn dirichlet_pair(alpha: &[f64], i: usize, j: usize) -> f64 {
        let a0: f64 = alpha.iter().sum();
        alpha[i] * (alpha[j] + if i == j { 1.0 } else { 0.0 }) / (a0 * (a0 + 1.0))
    }

    fn dirichlet_triple(alpha: &[f64], i: usize, j: usize, l: usize) -> f64 {
        let a0: f64 = alpha.iter().sum();
        let dl = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        alpha[i] * (alpha[j] + dl(i, j)) * (alpha[l] + dl(i, l) + dl(j, l)) / (a0 * (a0 + 1.0) * (a0 + 2.0))
    }

    /// Raw word moments from closed-form Dirichlet moments.
    fn lda_raw_oracle(spec: &LdaSpec) -> WordMoments {
        let (d, k) = (spec.d(), spec.k());
        let a0 = spec.alpha0();
        let mu = &spec.topics;
        let m1: Vec<f64> = (0..d).map(|a| (0..k).map(|j| spec.alpha[j] / a0 * mu[j][a]).sum()).collect();
        let m2 = Matrix::from_fn(d, d, |a, b| {
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    s += dirichlet_pair(&spec.alpha, i, j) * mu[i][a] * mu[j][b];
                }
            }
            s
        });
        let m3 = DenseTensor::from_fn(&[d, d, d], |ix| {
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    for l in 0..k {
                        s += dirichlet_triple(&spec.alpha, i, j, l) * mu[i][ix[0]] * mu[j][ix[1]] * mu[l][ix[2]];
                    }
                }
            }
            s
        });
        WordMoments { m1, m2, m3 }
    }

    #[test]
    fn lda_identity_with_dirichlet_oracle() {
        let spec = LdaSpec { alpha: vec![1.0, 2.0, 3.0], topics: random_topics(6, 3, 2).into_iter().map(fix_sum).collect(), words: 3 };
        let raw = lda_raw_oracle(&spec);
        let got = lda_from_raw(spec.alpha0(), &raw).unwrap();
        let want = lda_population_moments(&spec).unwrap();
        assert!(got.m2.max_abs_diff(&want.m2) < 1e-10);
        assert!(got.m3.unwrap().max_abs_diff(want.m3.as_ref().unwrap()) < 1e-10);
    }

    #[test]
    fn lda_single_topic_and_small_alpha0() {
        let mu = vec![0.1, 0.6, 0.3];
        let spec = LdaSpec { alpha: vec![2.5], topics: vec![mu.clone()], words: 3 };
        let got = lda_from_raw(2.5, &lda_raw_oracle(&spec)).unwrap();
        let want = Matrix::from_fn(3, 3, |i, j| mu[i] * mu[j] / 3.5);
        assert!(got.m2.max_abs_diff(&want) < 1e-14);
        assert!(lda_population_moments(&spec).unwrap().m2.max_abs_diff(&want) < 1e-14);

        // α₀ → 0 degenerates to the single topic model with w = α/α₀
        let a0 = 1e-6;
        let w = [0.25, 0.75];
        let topics: Vec<Vec<f64>> = random_topics(4, 2, 3).into_iter().map(fix_sum).collect();
        let lda = LdaSpec { alpha: w.iter().map(|x| x * a0).collect(), topics: topics.clone(), words: 3 };
        let single = TopicSpec { weights: w.to_vec(), topics, words: 3 };
        let l = lda_population_moments(&lda).unwrap();
        let s = topic_population_moments(&single).unwrap();
        assert!(l.m2.max_abs_diff(&s.m2) < 1e-5);
        assert!(l.m3.unwrap().max_abs_diff(s.m3.as_ref().unwrap()) < 1e-5);
    }

    #[test]
    fn lda_empirical_and_alpha_recovery() {
        let spec = LdaSpec { alpha: vec![0.3, 0.2], topics: vec![vec![0.7, 0.2, 0.1, 0.0], vec![0.0, 0.1, 0.2, 0.7]], words: 3 };
        let docs = sample_lda(&spec, 100_000, 11).unwrap();
        let emp = lda_moments(&docs, 4, spec.alpha0()).unwrap();
        let pop = lda_population_moments(&spec).unwrap();
        assert!(emp.m2.max_abs_diff(&pop.m2) < 0.01);
        let comps = spec.topic_matrix().scale_cols(&spec.alpha.iter().map(|a| (a / (1.5 * 0.5f64)).sqrt()).collect::<Vec<_>>());
        let alpha = lda_alpha_from_components(&comps, 0.5);
        assert!((alpha[0] - 0.3).abs() < 1e-12 && (alpha[1] - 0.2).abs() < 1e-12);
    }
}
