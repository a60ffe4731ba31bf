//! Pointwise mutual information moments of noisy-or networks.

use crate::error::{ensure, Error, Result};
use crate::tensor::{symmetric_tensor, DenseTensor, Matrix};

use super::spec::NoisyOrSpec;
use super::{weighted_gram, Family, MomentSet};

/// PMI matrix and PMI3 tensor of the "absent" indicators `1 − x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmiMoments {
    pub m: Matrix,
    pub t: DenseTensor,
}

impl PmiMoments {
    pub fn into_moment_set(self) -> MomentSet {
        let mut ms = MomentSet::new(Family::NoisyOr, self.m);
        ms.m3 = Some(self.t);
        ms
    }
}

/// Builds PMI and PMI3 from `p(S) = Pr[x_i = 0 for all i ∈ S]`, where `S`
/// holds one to three distinct coordinates.
fn pmi_from(d: usize, p: impl Fn(&[usize]) -> f64) -> PmiMoments {
    let set = |ix: &[usize]| {
        let mut s = ix.to_vec();
        s.sort_unstable();
        s.dedup();
        s
    };
    let lp = |ix: &[usize]| p(&set(ix)).ln();
    let single: Vec<f64> = (0..d).map(|i| lp(&[i])).collect();
    let pair = Matrix::from_fn(d, d, |i, j| lp(&[i, j]));
    let m = Matrix::from_fn(d, d, |i, j| pair.get(i, j) - single[i] - single[j]);
    let t = DenseTensor::from_fn(&[d, d, d], |ix| {
        let (a, b, c) = (ix[0], ix[1], ix[2]);
        pair.get(a, b) + pair.get(b, c) + pair.get(a, c) - lp(&[a, b, c]) - single[a] - single[b] - single[c]
    });
    PmiMoments { m, t }
}

/// Empirical PMI moments. Each event count gets `smoothing` added, with the
/// total adjusted over the `2^|S|` cells of the joint table.
pub fn noisy_or_pmi(samples: &Matrix, smoothing: f64) -> Result<PmiMoments> {
    let (n, d) = samples.shape();
    ensure!(n >= 1, Validation, "no samples");
    ensure!(smoothing >= 0.0 && smoothing.is_finite(), Validation, "smoothing must be nonnegative");
    ensure!(samples.data().iter().all(|&x| x == 0.0 || x == 1.0), Validation, "noisy-or samples must be binary");
    let mut c1 = vec![0u64; d];
    let mut c2 = vec![0u64; d * d];
    let mut c3 = vec![0u64; d * d * d];
    let mut zeros = Vec::with_capacity(d);
    for r in 0..n {
        zeros.clear();
        zeros.extend((0..d).filter(|&i| samples.get(r, i) == 0.0));
        for (x, &a) in zeros.iter().enumerate() {
            c1[a] += 1;
            for (y, &b) in zeros.iter().enumerate().skip(x + 1) {
                c2[a * d + b] += 1;
                for &c in &zeros[y + 1..] {
                    c3[(a * d + b) * d + c] += 1;
                }
            }
        }
    }
    let count = |s: &[usize]| match *s {
        [a] => c1[a],
        [a, b] => c2[a * d + b],
        [a, b, c] => c3[(a * d + b) * d + c],
        _ => unreachable!("one to three coordinates"),
    };
    if smoothing == 0.0 {
        if let Some(i) = (0..d).find(|&i| c1[i] == 0) {
            return Err(Error::Validation(format!("coordinate {} is never absent; PMI needs smoothing", i)));
        }
        let zero_pair = (0..d * d).find(|&p| p / d < p % d && c2[p] == 0);
        let zero_triple = (0..d * d * d).find(|&p| {
            let (a, b, c) = (p / (d * d), p / d % d, p % d);
            a < b && b < c && c3[p] == 0
        });
        if zero_pair.is_some() || zero_triple.is_some() {
            return Err(Error::Validation("a joint absence event has zero count; PMI needs smoothing".into()));
        }
    }
    Ok(pmi_from(d, |s| {
        let cells = (1u64 << s.len()) as f64;
        (count(s) as f64 + smoothing) / (n as f64 + cells * smoothing)
    }))
}

/// Exact PMI moments: `Pr[x_S = 0] = Π_j (1 − ρ + ρ exp(−Σ_{i∈S} W_ij))`.
pub fn noisy_or_population_pmi(spec: &NoisyOrSpec) -> Result<PmiMoments> {
    spec.validate()?;
    let rho = spec.rho;
    Ok(pmi_from(spec.d(), |s| {
        spec.weights.iter().map(|w| 1.0 - rho + rho * (-s.iter().map(|&i| w[i]).sum::<f64>()).exp()).product()
    }))
}

/// `ρFFᵀ + ρ²GGᵀ` and `ρΣF_j^{⊗3} + ρ²ΣG_j^{⊗3}` with `F = 1 − e^{−W}`,
/// `G = 1 − e^{−2W}`.
pub fn noisy_or_low_rank(spec: &NoisyOrSpec) -> Result<PmiMoments> {
    spec.validate()?;
    let w = spec.weight_matrix();
    let f = Matrix::from_fn(w.rows(), w.cols(), |i, j| 1.0 - (-w.get(i, j)).exp());
    let g = Matrix::from_fn(w.rows(), w.cols(), |i, j| 1.0 - (-2.0 * w.get(i, j)).exp());
    let k = spec.k();
    let (r1, r2) = (vec![spec.rho; k], vec![spec.rho * spec.rho; k]);
    Ok(PmiMoments {
        m: weighted_gram(&r1, &f).add(&weighted_gram(&r2, &g))?,
        t: symmetric_tensor(&r1, &f, 3)?.add(&symmetric_tensor(&r2, &g, 3)?)?,
    })
}
