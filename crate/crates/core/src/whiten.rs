//! Whitening, un-whitening, asymmetric symmetrization and their inverses, and
//! the whiten → power → un-whiten pipeline for non-orthogonal tensors.

use crate::error::{ensure, Result};
use crate::matrix_methods::{self, Whitening};
use crate::power::{decompose_orthogonal, PowerConfig};
use crate::report::DecompositionReport;
use crate::tensor::{contract_iiw, multilinear, DenseTensor, KruskalForm, Matrix};

/// Everything needed to map between the whitened space and the original one.
#[derive(Debug, Clone)]
pub struct WhiteningContext {
    pub u: Matrix,
    pub gamma: Vec<f64>,
    pub w: Matrix,
    pub assumed_weights: Vec<f64>,
    pub k: usize,
    pub dropped: Vec<f64>,
}

impl WhiteningContext {
    pub fn from_matrix(m: &Matrix, k: usize) -> Result<Self> {
        let Whitening { u, gamma, w, dropped } = matrix_methods::whitening(m, k)?;
        Ok(Self { u, gamma, w, assumed_weights: vec![1.0; k], k, dropped })
    }

    /// `U diag(|γ|^{1/2})`, the left inverse of `Wᵀ` on the column span.
    pub fn unwhitening_matrix(&self) -> Matrix {
        self.u.scale_cols(&self.gamma.iter().map(|g| g.abs().sqrt()).collect::<Vec<_>>())
    }

    pub fn sign_pattern(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| g.signum()).collect()
    }
}

/// `T(I, I, θ)`.
pub fn slice_contract(t: &DenseTensor, theta: &[f64]) -> Result<Matrix> {
    contract_iiw(t, theta)
}

/// `T(W, W, W)` with `W` the whitening matrix of `M`.
pub fn whiten(t: &DenseTensor, m: &Matrix, k: usize) -> Result<(DenseTensor, WhiteningContext)> {
    ensure!(t.order() == 3 && t.is_cubical(), Dimension, "whiten needs a cubical order-3 tensor");
    ensure!(m.shape() == (t.dims()[0], t.dims()[0]), Dimension, "M must be {}x{}", t.dims()[0], t.dims()[0]);
    let ctx = WhiteningContext::from_matrix(m, k)?;
    let tw = multilinear(t, &ctx.w, &ctx.w, &ctx.w)?;
    Ok((tw, ctx))
}

/// `a = λ̃^{-1/2} U diag(|γ|^{1/2}) v`.
pub fn unwhiten(ctx: &WhiteningContext, v: &[f64], lambda_tilde: f64) -> Result<Vec<f64>> {
    ensure!(v.len() == ctx.k, Dimension, "vector length {} vs rank {}", v.len(), ctx.k);
    let a = ctx.unwhitening_matrix().matvec(v)?;
    let s = 1.0 / lambda_tilde.sqrt();
    Ok(a.into_iter().map(|x| x * s).collect())
}

/// How component scales are resolved after un-whitening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleModel {
    /// Assume unit second-moment weights; returns the scale-invariant pairs.
    #[default]
    UnitAssumed,
    /// Tensor and matrix weights coincide (λ = λ̃), so λ = Λ̂⁻² and a = Λ̂·â.
    EqualWeights,
}

/// Output of [`decompose_nonorthogonal`].
#[derive(Debug, Clone)]
pub struct NonOrthogonalResult {
    /// Normalized Kruskal form reproducing the input tensor.
    pub form: KruskalForm,
    /// Recovered components as columns; scaling follows the [`ScaleModel`].
    pub components: Matrix,
    /// Λ̂ for unit-assumed weights, λ̂ for equal weights.
    pub weights: Vec<f64>,
    /// Eigenvalues of the whitened tensor.
    pub whitened_weights: Vec<f64>,
    pub context: WhiteningContext,
    pub report: DecompositionReport,
}

/// Whiten with `M`, decompose the orthogonal tensor, un-whiten each component.
pub fn decompose_nonorthogonal(
    t: &DenseTensor,
    m: &Matrix,
    k: usize,
    cfg: &PowerConfig,
    scale: ScaleModel,
) -> Result<NonOrthogonalResult> {
    let (tw, ctx) = whiten(t, m, k)?;
    let (orth, mut report) = decompose_orthogonal(&tw, k, cfg)?;
    report.method = "whiten-power".into();
    let d = t.dims()[0];
    let mut comps = Matrix::zeros(d, k);
    let mut weights = Vec::with_capacity(k);
    for j in 0..k {
        let mu = orth.weights[j];
        let a = unwhiten(&ctx, &orth.factors[0].col(j), 1.0)?;
        match scale {
            ScaleModel::UnitAssumed => {
                comps.set_col(j, &a);
                weights.push(mu);
            }
            ScaleModel::EqualWeights => {
                comps.set_col(j, &a.iter().map(|x| x * mu).collect::<Vec<_>>());
                weights.push(mu.powi(-2));
            }
        }
    }
    let form = KruskalForm::symmetric(weights.clone(), comps.clone(), 3)?.normalized();
    report.sigma_min_m = ctx.gamma.last().map(|g| g.abs());
    report.lambda_min = orth.weights.iter().copied().reduce(f64::min);
    report.lambda_max = orth.weights.iter().copied().reduce(f64::max);
    if ctx.gamma.iter().any(|&g| g < 0.0) {
        report.notes.push("second-moment matrix has negative eigenvalues; whitened with |γ|".into());
    }
    let back = crate::tensor::kruskal_to_tensor(&form)?;
    report.reconstruction_residual = Some(crate::tensor::frobenius_norm(&t.sub(&back)?));
    Ok(NonOrthogonalResult { form, components: comps, weights, whitened_weights: orth.weights, context: ctx, report })
}

/// Per-mode whitening plus the cross matrices that align modes b and c with a.
#[derive(Debug, Clone)]
pub struct SymmetrizationContext {
    pub a: WhiteningContext,
    pub b: WhiteningContext,
    pub c: WhiteningContext,
    pub r_ab: Matrix,
    pub r_ac: Matrix,
    pub notes: Vec<String>,
}

/// Second-moment matrices consumed by [`symmetrize`].
#[derive(Debug, Clone)]
pub struct ModeMoments<'a> {
    pub ma: &'a Matrix,
    pub mb: &'a Matrix,
    pub mc: &'a Matrix,
    pub mab: &'a Matrix,
    pub mac: &'a Matrix,
    /// Accepted for completeness; the construction does not need it.
    pub mbc: Option<&'a Matrix>,
}

/// `T(W_a, W_b R_abᵀ, W_c R_acᵀ)`, a symmetric `k×k×k` tensor.
pub fn symmetrize(t: &DenseTensor, mm: &ModeMoments, k: usize) -> Result<(DenseTensor, SymmetrizationContext)> {
    ensure!(t.order() == 3, Dimension, "symmetrize needs an order-3 tensor");
    let d = t.dims();
    ensure!(mm.ma.shape() == (d[0], d[0]), Dimension, "Ma must be {0}x{0}", d[0]);
    ensure!(mm.mb.shape() == (d[1], d[1]), Dimension, "Mb must be {0}x{0}", d[1]);
    ensure!(mm.mc.shape() == (d[2], d[2]), Dimension, "Mc must be {0}x{0}", d[2]);
    ensure!(mm.mab.shape() == (d[0], d[1]), Dimension, "Mab must be {}x{}", d[0], d[1]);
    ensure!(mm.mac.shape() == (d[0], d[2]), Dimension, "Mac must be {}x{}", d[0], d[2]);
    let a = WhiteningContext::from_matrix(mm.ma, k)?;
    let b = WhiteningContext::from_matrix(mm.mb, k)?;
    let c = WhiteningContext::from_matrix(mm.mc, k)?;
    let r_ab = a.w.t_matmul(&mm.mab.matmul(&b.w)?)?;
    let r_ac = a.w.t_matmul(&mm.mac.matmul(&c.w)?)?;
    let tb = b.w.matmul(&r_ab.transpose())?;
    let tc = c.w.matmul(&r_ac.transpose())?;
    let ts = multilinear(t, &a.w, &tb, &tc)?;
    let mut notes = Vec::new();
    if mm.mbc.is_some() {
        notes.push("M_bc was supplied but is not used by the symmetrization".into());
    }
    Ok((ts, SymmetrizationContext { a, b, c, r_ab, r_ac, notes }))
}

/// Assumed per-component weights of the second-moment and cross matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossWeights {
    pub a: f64,
    pub ab: f64,
    pub ac: f64,
}

impl Default for CrossWeights {
    fn default() -> Self {
        Self { a: 1.0, ab: 1.0, ac: 1.0 }
    }
}

/// Map a unit component of the symmetrized tensor back to `(a, b, c)`.
pub fn unsymmetrize(ctx: &SymmetrizationContext, ahat: &[f64], w: CrossWeights) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let a = unwhiten(&ctx.a, ahat, w.a)?;
    let rb = ctx.r_ab.t_matvec(ahat)?;
    let rc = ctx.r_ac.t_matvec(ahat)?;
    let sb = w.a.sqrt() / w.ab;
    let sc = w.a.sqrt() / w.ac;
    let b = ctx.b.unwhitening_matrix().matvec(&rb)?.into_iter().map(|x| x * sb).collect();
    let c = ctx.c.unwhitening_matrix().matvec(&rc)?.into_iter().map(|x| x * sc).collect();
    Ok((a, b, c))
}

/// Recovered asymmetric components.
#[derive(Debug, Clone)]
pub struct AsymmetricResult {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    /// Equal-weight estimates `μ̂⁻²` (meaningful when all weights coincide).
    pub weights: Vec<f64>,
    pub symmetric_weights: Vec<f64>,
    pub context: SymmetrizationContext,
    pub report: DecompositionReport,
}

/// Symmetrize, run the power method, and invert the symmetrization.
///
/// With `equal_weights` every assumed weight is set to `μ̂⁻²`, which is exact
/// when the tensor and all matrices share the same component weights.
pub fn decompose_asymmetric(
    t: &DenseTensor,
    mm: &ModeMoments,
    k: usize,
    cfg: &PowerConfig,
    equal_weights: bool,
) -> Result<AsymmetricResult> {
    let (ts, ctx) = symmetrize(t, mm, k)?;
    let ts = ts.symmetrized()?;
    let (orth, mut report) = decompose_orthogonal(&ts, k, cfg)?;
    report.method = "symmetrize-power".into();
    report.notes.extend(ctx.notes.iter().cloned());
    let d = t.dims();
    let (mut a, mut b, mut c) = (Matrix::zeros(d[0], k), Matrix::zeros(d[1], k), Matrix::zeros(d[2], k));
    let mut weights = Vec::with_capacity(k);
    for j in 0..k {
        let mu = orth.weights[j];
        let lw = if equal_weights { mu.powi(-2) } else { 1.0 };
        let (x, y, z) = unsymmetrize(&ctx, &orth.factors[0].col(j), CrossWeights { a: lw, ab: lw, ac: lw })?;
        a.set_col(j, &x);
        b.set_col(j, &y);
        c.set_col(j, &z);
        weights.push(lw);
    }
    Ok(AsymmetricResult { a, b, c, weights, symmetric_weights: orth.weights, context: ctx, report })
}
