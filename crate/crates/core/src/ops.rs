//! Linear operators and the face restrictions used by the solvers.
//!
//! Every operator here is immutable after construction and `Send + Sync`,
//! so applications may be shared across threads. All `apply` paths return a
//! freshly allocated vector.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::circulant::BlockCirculantOp;
use crate::error::{check_len, Error, Result};

/// A real linear operator `A: R^ncols -> R^nrows` with its adjoint.
pub trait LinOp: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `A x`. Panics if `x.len() != ncols()`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `A^T y`. Panics if `y.len() != nrows()`.
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64>;

    /// Access to the block-circulant structure, when the operator has one.
    fn as_block_circulant(&self) -> Option<&BlockCirculantOp> {
        None
    }
}

impl<T: LinOp + ?Sized> LinOp for Arc<T> {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        (**self).apply_adjoint(y)
    }
    fn as_block_circulant(&self) -> Option<&BlockCirculantOp> {
        (**self).as_block_circulant()
    }
}

/// Materialize any operator column by column. Intended for small test sizes.
pub fn to_dense(op: &dyn LinOp) -> DMatrix<f64> {
    let (m, n) = (op.nrows(), op.ncols());
    let mut out = DMatrix::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply(&e);
        out.set_column(j, &DVector::from_vec(col));
        e[j] = 0.0;
    }
    out
}

/// Dense matrix operator.
#[derive(Debug, Clone)]
pub struct DenseOp {
    mat: DMatrix<f64>,
}

impl DenseOp {
    pub fn new(mat: DMatrix<f64>) -> Self {
        Self { mat }
    }

    pub fn from_row_slice(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(nrows, ncols, data))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }
}

impl LinOp for DenseOp {
    fn nrows(&self) -> usize {
        self.mat.nrows()
    }
    fn ncols(&self) -> usize {
        self.mat.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "DenseOp::apply length");
        (&self.mat * DVector::from_column_slice(x)).data.into()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows(), "DenseOp::apply_adjoint length");
        self.mat.tr_mul(&DVector::from_column_slice(y)).data.into()
    }
}

/// Diagonal operator `diag(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOp {
    diag: Vec<f64>,
}

impl DiagonalOp {
    pub fn new(diag: Vec<f64>) -> Self {
        Self { diag }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(vec![1.0; n])
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_positive(&self) -> bool {
        self.diag.iter().all(|&d| d > 0.0)
    }
}

impl LinOp for DiagonalOp {
    fn nrows(&self) -> usize {
        self.diag.len()
    }
    fn ncols(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.diag.len(), "DiagonalOp::apply length");
        self.diag.iter().zip(x).map(|(d, v)| d * v).collect()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

/// Identity on `R^n`. Applications return an exact copy of the input.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    n: usize,
}

impl IdentityOp {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinOp for IdentityOp {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "IdentityOp::apply length");
        x.to_vec()
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.apply(y)
    }
}

/// Product `A_0 A_1 ... A_{k-1}`; applied right to left.
pub struct Composed {
    ops: Vec<Arc<dyn LinOp>>,
}

/// Compose a list of operators into their product.
pub fn compose(ops: Vec<Arc<dyn LinOp>>) -> Result<Composed> {
    if ops.is_empty() {
        return Err(Error::Config("compose needs at least one operator".into()));
    }
    for pair in ops.windows(2) {
        check_len("compose", pair[0].ncols(), pair[1].nrows())?;
    }
    Ok(Composed { ops })
}

impl LinOp for Composed {
    fn nrows(&self) -> usize {
        self.ops[0].nrows()
    }
    fn ncols(&self) -> usize {
        self.ops[self.ops.len() - 1].ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for op in self.ops.iter().rev() {
            v = op.apply(&v);
        }
        v
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut v = y.to_vec();
        for op in &self.ops {
            v = op.apply_adjoint(&v);
        }
        v
    }
}

/// Partition of the coordinates into free and fixed (at the bound) indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceMask {
    free: Vec<bool>,
    free_idx: Vec<usize>,
}

impl FaceMask {
    pub fn new(free: Vec<bool>) -> Self {
        let free_idx = free
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect();
        Self { free, free_idx }
    }

    pub fn all_free(n: usize) -> Self {
        Self::new(vec![true; n])
    }

    /// Mask whose fixed set is `fixed` (true = fixed at the bound).
    pub fn from_fixed(fixed: &[bool]) -> Self {
        Self::new(fixed.iter().map(|&b| !b).collect())
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn n_free(&self) -> usize {
        self.free_idx.len()
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.free[i]
    }

    pub fn free(&self) -> &[bool] {
        &self.free
    }

    pub fn free_indices(&self) -> &[usize] {
        &self.free_idx
    }

    /// Entries of `x` on free coordinates.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len(), "FaceMask::gather length");
        self.free_idx.iter().map(|&i| x[i]).collect()
    }

    /// Full-length vector with `v` on free coordinates and zeros elsewhere.
    pub fn scatter(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_free(), "FaceMask::scatter length");
        let mut out = vec![0.0; self.len()];
        for (&i, &vi) in self.free_idx.iter().zip(v) {
            out[i] = vi;
        }
        out
    }

    pub fn zero_fixed(&self, x: &mut [f64]) {
        for (xi, &f) in x.iter_mut().zip(&self.free) {
            if !f {
                *xi = 0.0;
            }
        }
    }
}

/// Principal submatrix `M_FF` realized as scatter, apply, gather.
pub struct Restricted<'a> {
    op: &'a dyn LinOp,
    mask: &'a FaceMask,
}

/// Restrict a square operator to the free coordinates of `mask`.
pub fn restrict<'a>(op: &'a dyn LinOp, mask: &'a FaceMask) -> Result<Restricted<'a>> {
    check_len("restrict (square operator)", op.nrows(), op.ncols())?;
    check_len("restrict (mask length)", op.ncols(), mask.len())?;
    Ok(Restricted { op, mask })
}

impl LinOp for Restricted<'_> {
    fn nrows(&self) -> usize {
        self.mask.n_free()
    }
    fn ncols(&self) -> usize {
        self.mask.n_free()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mask.gather(&self.op.apply(&self.mask.scatter(v)))
    }
    fn apply_adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.mask.gather(&self.op.apply_adjoint(&self.mask.scatter(v)))
    }
}

/// `d = -P̄ g`: `d_F = -P_FF g_F` on the non-binding coordinates, `d_G = 0`.
pub fn masked_scaled_direction(p: &dyn LinOp, g: &[f64], binding: &[bool]) -> Result<Vec<f64>> {
    check_len("masked_scaled_direction (operator)", p.ncols(), g.len())?;
    check_len("masked_scaled_direction (binding set)", g.len(), binding.len())?;
    let mut gf = g.to_vec();
    for (gi, &b) in gf.iter_mut().zip(binding) {
        if b {
            *gi = 0.0;
        }
    }
    let mut d = p.apply(&gf);
    for (di, &b) in d.iter_mut().zip(binding) {
        *di = if b { 0.0 } else { -*di };
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p3() -> DenseOp {
        DenseOp::from_row_slice(3, 3, &[4., 1., 1., 1., 3., 1., 1., 1., 2.])
    }

    fn random_dense(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let b = random_dense(rng, n, n);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn compose_identity_and_diagonals() {
        let id: Arc<dyn LinOp> = Arc::new(IdentityOp::new(3));
        let c = compose(vec![id]).unwrap();
        assert_eq!(c.apply(&[1., 2., 3.]), vec![1., 2., 3.]);

        let d2: Arc<dyn LinOp> = Arc::new(DiagonalOp::new(vec![2.0]));
        let d3: Arc<dyn LinOp> = Arc::new(DiagonalOp::new(vec![3.0]));
        let c = compose(vec![d2, d3]).unwrap();
        assert_eq!(c.apply(&[1.0]), vec![6.0]);
    }

    #[test]
    fn compose_adjoint_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_dense(&mut rng, 5, 4);
        let b = random_dense(&mut rng, 4, 3);
        let prod_t = (&a * &b).transpose();
        let c = compose(vec![
            Arc::new(DenseOp::new(a)) as Arc<dyn LinOp>,
            Arc::new(DenseOp::new(b)),
        ])
        .unwrap();
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = c.apply_adjoint(&y);
        let want = &prod_t * DVector::from_vec(y);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn compose_rejects_mismatch() {
        let a: Arc<dyn LinOp> = Arc::new(IdentityOp::new(3));
        let b: Arc<dyn LinOp> = Arc::new(IdentityOp::new(2));
        assert!(matches!(compose(vec![a, b]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn restrict_is_principal_submatrix() {
        let p = p3();
        let mask = FaceMask::new(vec![true, false, true]);
        let r = to_dense(&restrict(&p, &mask).unwrap());
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[4., 1., 1., 2.]));

        let all = FaceMask::all_free(3);
        assert_eq!(to_dense(&restrict(&p, &all).unwrap()), *p.matrix());
    }

    #[test]
    fn restrict_keeps_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = DenseOp::new(random_spd(&mut rng, 6));
        let mask = FaceMask::new(vec![true, false, false, true, true, false]);
        let r = to_dense(&restrict(&p, &mask).unwrap());
        let eig = r.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn masked_direction_hand_example() {
        let d = masked_scaled_direction(&p3(), &[1., 1., 1.], &[false, true, false]).unwrap();
        assert_eq!(d, vec![-5.0, 0.0, -3.0]);
        let d = masked_scaled_direction(&IdentityOp::new(3), &[1., -2., 3.], &[false; 3]).unwrap();
        assert_eq!(d, vec![-1.0, 2.0, -3.0]);
    }

    #[test]
    fn masked_direction_decreases_quadratic() {
        // f(x) = 1/2 x^T H x + c^T x on x >= 0, step Proj(x + alpha d) with tiny alpha.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let mut trials = 0;
        while trials < 50 {
            let p = DenseOp::new(random_spd(&mut rng, n));
            let h = random_spd(&mut rng, n);
            let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let x = DVector::from_fn(n, |_, _| {
                if rng.random_bool(0.4) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            });
            let f = |z: &DVector<f64>| 0.5 * z.dot(&(&h * z)) + c.dot(z);
            let g = &h * &x + &c;
            let binding: Vec<bool> = (0..n).map(|i| x[i] == 0.0 && g[i] > 0.0).collect();
            let d = masked_scaled_direction(&p, g.as_slice(), &binding).unwrap();
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            for i in 0..n {
                if binding[i] {
                    assert_eq!(d[i], 0.0);
                }
            }
            let alpha = 1e-8;
            let xn = DVector::from_fn(n, |i, _| (x[i] + alpha * d[i]).max(0.0));
            assert!(f(&xn) < f(&x), "trial {trials}");
            trials += 1;
        }
    }

    #[test]
    fn adjoint_consistency_dense_and_diag() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseOp::new(random_dense(&mut rng, 6, 4));
        let d = DiagonalOp::new((0..5).map(|i| i as f64 + 0.5).collect());
        for _ in 0..100 {
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = crate::linalg::dot(&a.apply(&u), &v);
            let rhs = crate::linalg::dot(&u, &a.apply_adjoint(&v));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            let u: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = crate::linalg::dot(&d.apply(&u), &v);
            let rhs = crate::linalg::dot(&u, &d.apply_adjoint(&v));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn restrict_then_prolong_is_identity_on_free() {
        let mask = FaceMask::new(vec![false, true, true, false]);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mask.scatter(&mask.gather(&x)), vec![0.0, 2.0, 3.0, 0.0]);
    }
}
