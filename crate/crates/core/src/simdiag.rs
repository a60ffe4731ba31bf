//! Simultaneous diagonalization (Jennrich) for asymmetric order-3 tensors.

use crate::als::mttkrp;
use crate::error::{ensure, Error, Result};
use crate::linalg::{real_eigen, solve, solve_spd, svd};
use crate::report::DecompositionReport;
use crate::rng;
use crate::tensor::{contract_iiw, hadamard, normalize, DenseTensor, KruskalForm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SimdiagConfig {
    pub seed: u64,
    /// Accepted deviation of `α̂β̂` from 1 when pairing eigenvalues.
    pub pair_tol: f64,
    /// Two eigenvalues closer than this (relative to the largest) collide.
    pub collision_tol: f64,
    pub imag_tol: f64,
    pub max_redraws: usize,
}

impl Default for SimdiagConfig {
    fn default() -> Self {
        Self { seed: 0, pair_tol: 1e-6, collision_tol: 1e-6, imag_tol: 1e-8, max_redraws: 3 }
    }
}

impl SimdiagConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Eigen-side output of one draw, before solving for C.
#[derive(Debug, Clone)]
pub struct Diagonalization {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub a: Matrix,
    pub b: Matrix,
}

/// One attempt with fixed random directions `x`, `y`.
pub fn diagonalize(t: &DenseTensor, k: usize, x: &[f64], y: &[f64], cfg: &SimdiagConfig) -> Result<Diagonalization> {
    ensure!(t.order() == 3, Dimension, "simdiag needs an order-3 tensor");
    let (d1, d2, d3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    ensure!(k >= 1 && k <= d1 && k <= d2, RankDeficient, "rank {} exceeds the first two dimensions {}x{}", k, d1, d2);
    ensure!(x.len() == d3 && y.len() == d3, Dimension, "direction length must be {}", d3);
    let mx = contract_iiw(t, x)?;
    let my = contract_iiw(t, y)?;
    // Restrict both slices to the top-k singular subspaces of M_x.
    let s = svd(&mx)?;
    ensure!(
        s.singular_values[k - 1] > 1e-12 * s.singular_values[0].max(f64::MIN_POSITIVE),
        RankDeficient,
        "M_x has numerical rank below {}",
        k
    );
    let (uk, vk) = (s.u.take_cols(k), s.v.take_cols(k));
    let ux = uk.t_matmul(&mx)?.matmul(&vk)?;
    let uy = uk.t_matmul(&my)?.matmul(&vk)?;
    // Ũx Ũy⁻¹ = (Ũy⁻ᵀ Ũxᵀ)ᵀ
    let left = solve(&uy.transpose(), &ux.transpose())?.transpose();
    let right = solve(&ux, &uy)?.transpose();
    let (alpha, p) = real_eigen(&left, cfg.imag_tol)?;
    let (beta, q) = real_eigen(&right, cfg.imag_tol)?;
    let amax = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..k {
        for j in i + 1..k {
            if (alpha[i] - alpha[j]).abs() <= cfg.collision_tol * amax {
                return Err(Error::EigenCollision(format!(
                    "eigenvalues {:.6e} and {:.6e} coincide",
                    alpha[i], alpha[j]
                )));
            }
        }
    }
    let pairs = greedy_pairs(&alpha, &beta);
    let worst = pairs.iter().map(|&(i, j)| (alpha[i] * beta[j] - 1.0).abs()).fold(0.0, f64::max);
    ensure!(worst <= cfg.pair_tol, Numerical, "eigenvalue pairing off by {:.3e}", worst);
    let mut a = Matrix::zeros(d1, k);
    let mut b = Matrix::zeros(d2, k);
    let mut al = Vec::with_capacity(k);
    let mut be = Vec::with_capacity(k);
    for (slot, &(i, j)) in pairs.iter().enumerate() {
        a.set_col(slot, &normalize(&uk.matvec(&p.col(i))?));
        b.set_col(slot, &normalize(&vk.matvec(&q.col(j))?));
        al.push(alpha[i]);
        be.push(beta[j]);
    }
    Ok(Diagonalization { x: x.to_vec(), y: y.to_vec(), alpha: al, beta: be, a, b })
}

/// Nearest-first matching of `α_i` with `β_j` on `|α_iβ_j − 1|`.
fn greedy_pairs(alpha: &[f64], beta: &[f64]) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in alpha.iter().enumerate() {
        for (j, b) in beta.iter().enumerate() {
            cand.push(((a * b - 1.0).abs(), i, j));
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let (mut ui, mut uj) = (vec![false; alpha.len()], vec![false; beta.len()]);
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !ui[i] && !uj[j] {
            ui[i] = true;
            uj[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

/// Least-squares third factor given unit A and B: returns `(C, λ)` with unit
/// columns in C and `λ ≥ 0`.
pub fn solve_third_factor(t: &DenseTensor, a: &Matrix, b: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let k = a.cols();
    let placeholder = Matrix::zeros(t.dims()[2], k);
    let rhs = mttkrp(t, [a, b, &placeholder], 2)?;
    let g = hadamard(&a.t_matmul(a)?, &b.t_matmul(b)?)?;
    let cbar = solve_spd(&g, &rhs.transpose())?.transpose();
    let lambda = cbar.column_norms();
    let inv: Vec<f64> = lambda.iter().map(|&l| if l > 0.0 { 1.0 / l } else { 0.0 }).collect();
    Ok((cbar.scale_cols(&inv), lambda))
}

/// Decompose `T = Σ λ_j a_j⊗b_j⊗c_j` by simultaneous diagonalization.
///
/// Collisions and complex spectra trigger fresh random directions, up to
/// `max_redraws` times.
pub fn simdiag(t: &DenseTensor, k: usize, cfg: &SimdiagConfig) -> Result<(KruskalForm, DecompositionReport)> {
    ensure!(t.order() == 3, Dimension, "simdiag needs an order-3 tensor");
    let d3 = t.dims()[2];
    let mut report = DecompositionReport::new("simdiag", k);
    let mut last = None;
    for draw in 0..=cfg.max_redraws {
        let mut g = rng::stream(cfg.seed, draw as u32, 0);
        let x = rng::normal_vec(&mut g, d3);
        let y = rng::normal_vec(&mut g, d3);
        match diagonalize(t, k, &x, &y, cfg) {
            Ok(diag) => {
                let (c, lambda) = solve_third_factor(t, &diag.a, &diag.b)?;
                let form = KruskalForm::new(lambda, vec![diag.a, diag.b, c])?;
                report.restarts = Some(draw);
                report.reconstruction_residual = Some(crate::als::relative_error(
                    t,
                    &form.weights,
                    [&form.factors[0], &form.factors[1], &form.factors[2]],
                ));
                return Ok((form, report));
            }
            Err(e @ (Error::EigenCollision(_) | Error::ComplexEigen(_))) => {
                report.notes.push(format!("draw {}: {}", draw, e));
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let why = last.map(|e| e.to_string()).unwrap_or_default();
    Err(match why {
        w if w.contains("imaginary") => Error::ComplexEigen(format!("after {} redraws: {}", cfg.max_redraws, w)),
        w => Error::EigenCollision(format!("after {} redraws: {}", cfg.max_redraws, w)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{dot, kruskal_to_tensor, outer_rank1};

    fn rand_matrix(seed: u64, r: usize, c: usize) -> Matrix {
        let mut g = rng::stream(seed, 8, 1);
        Matrix::from_fn(r, c, |_, _| rng::normal(&mut g))
    }

    fn instance(seed: u64, d: usize, k: usize) -> (KruskalForm, DenseTensor) {
        let f: Vec<Matrix> = (0..3).map(|m| rand_matrix(seed * 3 + m, d, k)).collect();
        let form = KruskalForm::new((0..k).map(|j| 1.0 + j as f64 * 0.25).collect(), f).unwrap();
        let t = kruskal_to_tensor(&form).unwrap();
        (form, t)
    }

    #[test]
    fn diagonal_example() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let t = outer_rank1(1.0, &[&e1, &e1, &e1]).unwrap().add(&outer_rank1(2.0, &[&e2, &e2, &e2]).unwrap()).unwrap();
        let (form, _) = simdiag(&t, 2, &SimdiagConfig::with_seed(3)).unwrap();
        let mut w = form.weights.clone();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 2.0).abs() < 1e-12);
        for j in 0..2 {
            let a = form.factors[0].col(j);
            assert!(a[0].abs() < 1e-12 || a[1].abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one() {
        let (a, b, c) = ([1.0, 2.0, 2.0], [0.0, 3.0, 4.0], [1.0, 0.0, 0.0]);
        let t = outer_rank1(1.0, &[&a, &b, &c]).unwrap();
        let (form, _) = simdiag(&t, 1, &SimdiagConfig::default()).unwrap();
        assert!((form.weights[0] - 15.0).abs() < 1e-10);
        assert!((dot(&form.factors[0].col(0), &normalize(&a)).abs() - 1.0).abs() < 1e-12);
        assert!((dot(&form.factors[1].col(0), &normalize(&b)).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_random_instance() {
        let (_, t) = instance(1, 10, 8);
        let (form, report) = simdiag(&t, 8, &SimdiagConfig::with_seed(5)).unwrap();
        assert!(report.reconstruction_residual.unwrap() <= 1e-6);
        assert!(form.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn diagonalization_identity_and_pairing() {
        let (form, t) = instance(2, 7, 5);
        let mut g = rng::stream(1, 2, 3);
        let (x, y) = (rng::normal_vec(&mut g, 7), rng::normal_vec(&mut g, 7));
        let mx = contract_iiw(&t, &x).unwrap();
        let (a, b, c) = (&form.factors[0], &form.factors[1], &form.factors[2]);
        let scales: Vec<f64> = (0..5).map(|j| form.weights[j] * dot(&c.col(j), &x)).collect();
        let want = a.scale_cols(&scales).matmul(&b.transpose()).unwrap();
        assert!(mx.max_abs_diff(&want) < 1e-10);
        let d = diagonalize(&t, 5, &x, &y, &SimdiagConfig::default()).unwrap();
        for (al, be) in d.alpha.iter().zip(&d.beta) {
            assert!((al * be - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn parallel_c_columns_collide() {
        let (mut form, _) = instance(3, 6, 4);
        let c0 = form.factors[2].col(0);
        form.factors[2].set_col(1, &c0.iter().map(|v| -2.0 * v).collect::<Vec<_>>());
        let t = kruskal_to_tensor(&form).unwrap();
        let r = simdiag(&t, 4, &SimdiagConfig::default());
        assert!(matches!(r, Err(Error::EigenCollision(_))), "{:?}", r.map(|x| x.1));
    }

    #[test]
    fn rank_above_dims_is_rejected() {
        let (_, t) = instance(4, 3, 3);
        assert!(matches!(simdiag(&t, 4, &SimdiagConfig::default()), Err(Error::RankDeficient(_))));
    }
}
