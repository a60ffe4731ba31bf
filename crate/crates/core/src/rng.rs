//! Seeded counter-based random streams and the basic samplers built on them.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};

pub type Stream = ChaCha20Rng;

/// Generator for `seed` positioned on stream `(a, b)`.
pub fn stream(seed: u64, a: u32, b: u32) -> Stream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((a as u64) << 32) | b as u64);
    rng
}

pub fn uniform(rng: &mut impl RngCore) -> f64 {
    rng.random::<f64>()
}

/// Standard normal draw by Box-Muller (one of the pair is discarded).
pub fn normal(rng: &mut impl RngCore) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

pub fn normal_vec(rng: &mut impl RngCore, d: usize) -> Vec<f64> {
    (0..d).map(|_| normal(rng)).collect()
}

/// Uniform point on the unit sphere in `d` dimensions.
pub fn unit_sphere(rng: &mut impl RngCore, d: usize) -> Vec<f64> {
    loop {
        let v = normal_vec(rng, d);
        let n = crate::tensor::norm(&v);
        if n > 1e-300 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Inverse-CDF categorical draw; prefix sums are Kahan compensated.
pub fn categorical(rng: &mut impl RngCore, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut sum = 0.0;
    let mut c = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        let y = pi - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
        if u < sum {
            return i;
        }
    }
    // u landed in the rounding slack at the top
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Dirichlet draw as normalized Gamma variates.
pub fn dirichlet(rng: &mut impl RngCore, alpha: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let s: f64 = g.iter().sum();
    if s <= 0.0 {
        // every gamma underflowed; fall back to the largest shape
        let j = (0..alpha.len())
            .max_by(|&i, &j| alpha[i].total_cmp(&alpha[j]))
            .unwrap();
        g.iter_mut().for_each(|x| *x = 0.0);
        g[j] = 1.0;
        return g;
    }
    g.iter_mut().for_each(|x| *x /= s);
    g
}

/// Haar-distributed orthogonal matrix via QR of a Gaussian matrix.
pub fn orthogonal(rng: &mut impl RngCore, d: usize) -> crate::tensor::Matrix {
    let g = crate::tensor::Matrix::from_fn(d, d, |_, _| normal(rng));
    crate::linalg::qr_orthonormal(&g)
}
