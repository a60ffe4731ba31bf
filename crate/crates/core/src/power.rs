//! Robust tensor power method with deflation for symmetric order-3 tensors.

use crate::error::{ensure, Error, Result};
use crate::report::DecompositionReport;
use crate::rng;
use crate::tensor::{dot, norm, DenseTensor, KruskalForm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    /// Random restarts per extracted component (L).
    pub restarts: usize,
    /// Power iterations per restart and for the final polish (N).
    pub iterations: usize,
    /// Components to extract by deflation.
    pub rounds: usize,
    /// Early stop once consecutive iterates move less than this.
    pub tol: f64,
    pub seed: u64,
}

impl PowerConfig {
    /// Defaults for rank `k`: `L = 10k(⌈ln k⌉ + 1)`, `N = 100`, `tol = 1e-12`.
    pub fn for_rank(k: usize, seed: u64) -> Self {
        Self { restarts: default_restarts(k), iterations: 100, rounds: k, tol: 1e-12, seed }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.restarts >= 1, Validation, "restarts must be at least 1");
        ensure!(self.iterations >= 1, Validation, "iterations must be at least 1");
        ensure!(self.tol > 0.0, Validation, "tolerance must be positive");
        Ok(())
    }
}

pub fn default_restarts(k: usize) -> usize {
    let k = k.max(1);
    10 * k * ((k as f64).ln().ceil() as usize + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub eigenvector: Vec<f64>,
}

/// Symmetric order-3 tensor seen one `d×d` slab `T[a, :, :]` at a time.
///
/// The power method only touches a tensor through this trait, so implicit
/// operators that rebuild slabs on demand share its arithmetic exactly.
pub trait SlabOperator {
    fn dim(&self) -> usize;
    /// Calls `f(a, slab)` for `a = 0..dim` in order.
    fn for_each_slab(&self, f: &mut dyn FnMut(usize, &[f64]));
    /// Replace the operator by `T − λ θ^{⊗3}`.
    fn deflate(&mut self, pair: &EigenPair);

    /// `T(I, θ, θ)`.
    fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.for_each_slab(&mut |a, slab| out[a] = slab_quadratic(slab, theta));
        out
    }
}

/// `θᵀ S θ` for a row-major square slab.
pub fn slab_quadratic(slab: &[f64], theta: &[f64]) -> f64 {
    let d = theta.len();
    let mut s = 0.0;
    for b in 0..d {
        s += theta[b] * dot(&slab[b * d..(b + 1) * d], theta);
    }
    s
}

/// Entry of `T − λθ^{⊗3}` given the entry `t` of `T`.
#[inline]
pub fn deflated_entry(t: f64, pair: &EigenPair, a: usize, b: usize, c: usize) -> f64 {
    let th = &pair.eigenvector;
    t - pair.eigenvalue * th[a] * th[b] * th[c]
}

/// Dense symmetric tensor as a [`SlabOperator`].
#[derive(Debug, Clone)]
pub struct DenseOperator {
    t: DenseTensor,
}

impl DenseOperator {
    pub fn new(t: DenseTensor) -> Result<Self> {
        check_symmetric(&t)?;
        Ok(Self { t })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.t
    }
}

impl SlabOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.t.dims()[0]
    }

    fn for_each_slab(&self, f: &mut dyn FnMut(usize, &[f64])) {
        let d = self.dim();
        for (a, slab) in self.t.data().chunks_exact(d * d).enumerate() {
            f(a, slab);
        }
    }

    fn deflate(&mut self, pair: &EigenPair) {
        self.t = deflate(&self.t, pair);
    }
}

pub fn check_symmetric(t: &DenseTensor) -> Result<()> {
    ensure!(t.order() == 3 && t.is_cubical(), Dimension, "expected a cubical order-3 tensor, got {:?}", t.dims());
    let asym = t.asymmetry();
    ensure!(
        asym <= 1e-8,
        Validation,
        "tensor asymmetry {:.3e} exceeds 1e-8; symmetrize it first (whiten/symmetrize)",
        asym
    );
    Ok(())
}

/// One normalized power map `T(I,θ,θ)/‖T(I,θ,θ)‖`.
pub fn power_step(t: &DenseTensor, theta: &[f64]) -> Result<Vec<f64>> {
    ensure!(t.order() == 3 && t.is_cubical(), Dimension, "power step needs a cubical order-3 tensor");
    ensure!(theta.len() == t.dims()[0], Dimension, "vector length {} vs {}", theta.len(), t.dims()[0]);
    let op = DenseOperator { t: t.clone() };
    step(&op, theta).ok_or_else(|| Error::Numerical("degenerate start: T(I,θ,θ) = 0".into()))
}

fn step(op: &dyn SlabOperator, theta: &[f64]) -> Option<Vec<f64>> {
    let y = op.apply(theta);
    let n = norm(&y);
    if !(n > 0.0 && n.is_finite()) {
        return None;
    }
    Some(y.iter().map(|v| v / n).collect())
}

/// Iterates of the power map from `theta0`, starting with `theta0` itself.
pub fn power_trace(op: &dyn SlabOperator, theta0: &[f64], iters: usize) -> Vec<Vec<f64>> {
    let mut out = vec![theta0.to_vec()];
    for _ in 0..iters {
        match step(op, out.last().unwrap()) {
            Some(next) => out.push(next),
            None => break,
        }
    }
    out
}

/// Runs up to `n` iterations; returns the final iterate and the count used.
fn iterate(op: &dyn SlabOperator, theta: Vec<f64>, n: usize, tol: f64) -> Option<(Vec<f64>, usize)> {
    let mut cur = theta;
    for it in 0..n {
        let next = step(op, &cur)?;
        let moved = norm(&next.iter().zip(&cur).map(|(a, b)| a - b).collect::<Vec<_>>());
        cur = next;
        if moved < tol {
            return Some((cur, it + 1));
        }
    }
    Some((cur, n))
}

/// Extraction statistics for one deflation round.
#[derive(Debug, Clone)]
pub struct RoundStats {
    pub pair: EigenPair,
    pub iterations: usize,
    pub best_restart: usize,
    pub residual: f64,
}

/// One robust extraction on stream round `round` of the seed.
pub fn extract_with(op: &dyn SlabOperator, cfg: &PowerConfig, round: usize) -> Result<RoundStats> {
    cfg.validate()?;
    let d = op.dim();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut total_iters = 0;
    for r in 0..cfg.restarts {
        let mut g = rng::stream(cfg.seed, round as u32, r as u32);
        let theta0 = rng::unit_sphere(&mut g, d);
        let Some((theta, used)) = iterate(op, theta0, cfg.iterations, cfg.tol) else {
            continue;
        };
        total_iters += used;
        let val = dot(&theta, &op.apply(&theta));
        if best.as_ref().is_none_or(|(b, _, _)| val > *b) {
            best = Some((val, theta, r));
        }
    }
    let (_, theta, best_restart) =
        best.ok_or_else(|| Error::Numerical("every restart hit a zero image T(I,θ,θ)".into()))?;
    let (theta, used) = iterate(op, theta.clone(), cfg.iterations, cfg.tol).unwrap_or((theta, 0));
    total_iters += used;
    let image = op.apply(&theta);
    let lambda = dot(&theta, &image);
    let residual = norm(&image.iter().zip(&theta).map(|(y, t)| y - lambda * t).collect::<Vec<_>>());
    Ok(RoundStats {
        pair: EigenPair { eigenvalue: lambda, eigenvector: theta },
        iterations: total_iters,
        best_restart,
        residual,
    })
}

/// Robust eigenpair of a symmetric tensor (round 0 of the seed).
pub fn extract_eigenpair(t: &DenseTensor, cfg: &PowerConfig) -> Result<EigenPair> {
    let op = DenseOperator::new(t.clone())?;
    Ok(extract_with(&op, cfg, 0)?.pair)
}

/// `T − λ θ^{⊗3}`.
pub fn deflate(t: &DenseTensor, pair: &EigenPair) -> DenseTensor {
    let d = pair.eigenvector.len();
    let mut out = t.clone();
    let data = out.data_mut();
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let o = (a * d + b) * d + c;
                data[o] = deflated_entry(data[o], pair, a, b, c);
            }
        }
    }
    out
}

/// `k` rounds of extract-then-deflate on any slab operator.
pub fn decompose_operator(
    op: &mut dyn SlabOperator,
    k: usize,
    cfg: &PowerConfig,
) -> Result<(KruskalForm, DecompositionReport, Vec<EigenPair>)> {
    ensure!(k >= 1, Validation, "rank must be at least 1");
    let d = op.dim();
    let mut report = DecompositionReport::new("power", k);
    report.restarts = Some(cfg.restarts);
    let mut pairs = Vec::with_capacity(k);
    for s in 0..k {
        let stats = extract_with(op, cfg, s)?;
        op.deflate(&stats.pair);
        report.eigen_residuals.push(stats.residual);
        report.iterations.push(stats.iterations);
        pairs.push(stats.pair);
    }
    let mut weights = Vec::with_capacity(k);
    let mut v = Matrix::zeros(d, k);
    for (j, p) in pairs.iter().enumerate() {
        // -λ v^{⊗3} = λ (-v)^{⊗3} for odd order
        let s = if p.eigenvalue < 0.0 { -1.0 } else { 1.0 };
        weights.push(p.eigenvalue * s);
        v.set_col(j, &p.eigenvector.iter().map(|x| x * s).collect::<Vec<_>>());
    }
    Ok((KruskalForm::symmetric(weights, v, 3)?, report, pairs))
}

/// Orthogonal CP decomposition of a symmetric tensor by the robust power method.
pub fn decompose_orthogonal(t: &DenseTensor, k: usize, cfg: &PowerConfig) -> Result<(KruskalForm, DecompositionReport)> {
    let mut op = DenseOperator::new(t.clone())?;
    let (form, mut report, _) = decompose_operator(&mut op, k, cfg)?;
    report.deflation_residual = Some(crate::tensor::frobenius_norm(op.tensor()));
    let back = crate::tensor::kruskal_to_tensor(&form)?;
    report.reconstruction_residual = Some(crate::tensor::frobenius_norm(&t.sub(&back)?));
    Ok((form, report))
}
