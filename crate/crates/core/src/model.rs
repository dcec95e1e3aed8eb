//! Objective functions: a regularized least-squares quadratic, a weighted
//! reconstruction objective with a smooth edge-preserving penalty, and a
//! small dense quadratic used by tests and examples.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::circulant::{gram_sum, BlockCirculantOp, GramTerm};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, sub};
use crate::ops::{DiagonalOp, LinOp};

/// A smooth objective on `R^n`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_f(&self, x: &[f64]) -> f64;
    fn eval_grad(&self, x: &[f64]) -> Vec<f64>;

    fn eval_f_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval_f(x), self.eval_grad(x))
    }
}

/// An objective with Hessian-vector products.
pub trait SecondOrder: Objective {
    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// The Hessian of `f` at a fixed point, as a linear operator.
pub struct HessianAt<'a, M: SecondOrder + ?Sized> {
    model: &'a M,
    x: Vec<f64>,
}

impl<'a, M: SecondOrder + ?Sized> HessianAt<'a, M> {
    pub fn new(model: &'a M, x: &[f64]) -> Self {
        Self { model, x: x.to_vec() }
    }
}

impl<M: SecondOrder + ?Sized> LinOp for HessianAt<'_, M> {
    fn nrows(&self) -> usize {
        self.model.dim()
    }
    fn ncols(&self) -> usize {
        self.model.dim()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.model.hess_vec(&self.x, v)
    }
    fn apply_adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.model.hess_vec(&self.x, v)
    }
}

fn block_circulant<'a>(op: &'a dyn LinOp, what: &str) -> Result<&'a BlockCirculantOp> {
    op.as_block_circulant()
        .ok_or_else(|| Error::Config(format!("{what} must be block-circulant for the Hessian approximation")))
}

/// `½‖Ax − b‖² + ½λ‖Kx‖²`
#[derive(Clone)]
pub struct QuadraticModel {
    a: Arc<dyn LinOp>,
    b: Vec<f64>,
    k: Arc<dyn LinOp>,
    lambda: f64,
}

impl QuadraticModel {
    pub fn new(a: Arc<dyn LinOp>, b: Vec<f64>, k: Arc<dyn LinOp>, lambda: f64) -> Result<Self> {
        check_len("QuadraticModel data", a.nrows(), b.len())?;
        check_len("QuadraticModel regularizer", a.ncols(), k.ncols())?;
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {lambda}")));
        }
        Ok(Self { a, b, k, lambda })
    }

    pub fn a(&self) -> &Arc<dyn LinOp> {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn k(&self) -> &Arc<dyn LinOp> {
        &self.k
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The exact Hessian `A^T A + λ K^T K`, assembled as a block-circulant operator.
    pub fn hessian_approx_bc(&self) -> Result<BlockCirculantOp> {
        let a = block_circulant(self.a.as_ref(), "A")?;
        let k = block_circulant(self.k.as_ref(), "K")?;
        let wa = vec![1.0; a.s_out()];
        let wk = vec![1.0; k.s_out()];
        gram_sum(&[
            GramTerm { op: a, weights: &wa, coeff: 1.0 },
            GramTerm { op: k, weights: &wk, coeff: self.lambda },
        ])
    }
}

impl Objective for QuadraticModel {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        let r = sub(&self.a.apply(x), &self.b);
        let q = self.k.apply(x);
        0.5 * dot(&r, &r) + 0.5 * self.lambda * dot(&q, &q)
    }
    fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        self.eval_f_grad(x).1
    }
    fn eval_f_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = sub(&self.a.apply(x), &self.b);
        let q = self.k.apply(x);
        let f = 0.5 * dot(&r, &r) + 0.5 * self.lambda * dot(&q, &q);
        let mut g = self.a.apply_adjoint(&r);
        axpy(self.lambda, &self.k.apply_adjoint(&q), &mut g);
        (f, g)
    }
}

impl SecondOrder for QuadraticModel {
    fn hess_vec(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = self.a.apply_adjoint(&self.a.apply(v));
        axpy(self.lambda, &self.k.apply_adjoint(&self.k.apply(v)), &mut h);
        h
    }
}

/// `½‖Ax − b‖²_V + λ Σ_i √(δ² + [Kx]_i²)` with diagonal weights `V`.
#[derive(Clone)]
pub struct ReconModel {
    a: Arc<dyn LinOp>,
    b: Vec<f64>,
    weights: DiagonalOp,
    k: Arc<dyn LinOp>,
    lambda: f64,
    delta: f64,
}

impl ReconModel {
    /// Weights `V_ii = exp(−b_i)` taken from the data itself.
    pub fn new(a: Arc<dyn LinOp>, b: Vec<f64>, k: Arc<dyn LinOp>, lambda: f64, delta: f64) -> Result<Self> {
        let w = b.iter().map(|v| (-v).exp()).collect();
        Self::with_weights(a, b, DiagonalOp::new(w), k, lambda, delta)
    }

    pub fn with_weights(
        a: Arc<dyn LinOp>,
        b: Vec<f64>,
        weights: DiagonalOp,
        k: Arc<dyn LinOp>,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        check_len("ReconModel data", a.nrows(), b.len())?;
        check_len("ReconModel weights", a.nrows(), weights.diag().len())?;
        check_len("ReconModel regularizer", a.ncols(), k.ncols())?;
        if !weights.is_positive() {
            return Err(Error::Config("data weights must be positive".into()));
        }
        if !(lambda >= 0.0) || !(delta > 0.0) {
            return Err(Error::Config(format!(
                "need lambda >= 0 and delta > 0, got lambda = {lambda}, delta = {delta}"
            )));
        }
        Ok(Self {
            a,
            b,
            weights,
            k,
            lambda,
            delta,
        })
    }

    pub fn a(&self) -> &Arc<dyn LinOp> {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn weights(&self) -> &DiagonalOp {
        &self.weights
    }
    pub fn k(&self) -> &Arc<dyn LinOp> {
        &self.k
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Penalty curvature `δ² / (δ² + q²)^{3/2}`.
    pub fn penalty_curvature(&self, q: f64) -> f64 {
        let d2 = self.delta * self.delta;
        d2 / (d2 + q * q).powf(1.5)
    }

    /// Penalty slope `q / √(δ² + q²)`.
    pub fn penalty_slope(&self, q: f64) -> f64 {
        q / (self.delta * self.delta + q * q).sqrt()
    }

    /// Per-row weights averaged over the blocks of `A`.
    pub fn averaged_weights(&self) -> Result<Vec<f64>> {
        let a = block_circulant(self.a.as_ref(), "A")?;
        Ok(average_blocks(self.weights.diag(), a.n_b(), a.s_out()))
    }

    /// `A^T V̂ A + (λ/δ) K^T K`, where `V̂` repeats the block-averaged weights
    /// and `1/δ` is the penalty curvature at `Kx = 0`.
    pub fn hessian_approx_bc(&self) -> Result<BlockCirculantOp> {
        let a = block_circulant(self.a.as_ref(), "A")?;
        let k = block_circulant(self.k.as_ref(), "K")?;
        let wa = average_blocks(self.weights.diag(), a.n_b(), a.s_out());
        let wk = vec![1.0; k.s_out()];
        gram_sum(&[
            GramTerm { op: a, weights: &wa, coeff: 1.0 },
            GramTerm { op: k, weights: &wk, coeff: self.lambda / self.delta },
        ])
    }
}

/// Mean over `n_b` consecutive blocks of length `s`.
pub fn average_blocks(v: &[f64], n_b: usize, s: usize) -> Vec<f64> {
    assert_eq!(v.len(), n_b * s, "average_blocks length");
    let mut out = vec![0.0; s];
    for blk in v.chunks_exact(s) {
        axpy(1.0, blk, &mut out);
    }
    out.iter_mut().for_each(|o| *o /= n_b as f64);
    out
}

impl Objective for ReconModel {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        self.eval_f_grad(x).0
    }
    fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        self.eval_f_grad(x).1
    }
    fn eval_f_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let r = sub(&self.a.apply(x), &self.b);
        let wr = self.weights.apply(&r);
        let q = self.k.apply(x);
        let d2 = self.delta * self.delta;
        let pen: f64 = q.iter().map(|qi| (d2 + qi * qi).sqrt()).sum();
        let f = 0.5 * dot(&r, &wr) + self.lambda * pen;
        let psi: Vec<f64> = q.iter().map(|&qi| self.penalty_slope(qi)).collect();
        let mut g = self.a.apply_adjoint(&wr);
        axpy(self.lambda, &self.k.apply_adjoint(&psi), &mut g);
        (f, g)
    }
}

impl SecondOrder for ReconModel {
    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = self.a.apply_adjoint(&self.weights.apply(&self.a.apply(v)));
        let q = self.k.apply(x);
        let kv = self.k.apply(v);
        let nkv: Vec<f64> = q
            .iter()
            .zip(&kv)
            .map(|(&qi, &ki)| self.penalty_curvature(qi) * ki)
            .collect();
        axpy(self.lambda, &self.k.apply_adjoint(&nkv), &mut h);
        h
    }
}

/// `½ x^T Q x + c^T x` with dense symmetric `Q`.
#[derive(Debug, Clone)]
pub struct DenseQuadratic {
    q: DMatrix<f64>,
    c: DVector<f64>,
}

impl DenseQuadratic {
    pub fn new(q: DMatrix<f64>, c: Vec<f64>) -> Result<Self> {
        check_len("DenseQuadratic (square)", q.nrows(), q.ncols())?;
        check_len("DenseQuadratic (linear term)", q.nrows(), c.len())?;
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self {
            q,
            c: DVector::from_vec(c),
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn c(&self) -> &[f64] {
        self.c.as_slice()
    }
}

impl Objective for DenseQuadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn eval_f(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.q * &xv)) + self.c.dot(&xv)
    }
    fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        (&self.q * xv + &self.c).data.into()
    }
}

impl SecondOrder for DenseQuadratic {
    fn hess_vec(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(v)).data.into()
    }
}
