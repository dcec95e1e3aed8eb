//! Block-circulant scaling `C = F* diag(t^{1/2}) F` and metric `P = C C^T`.
//!
//! `t` holds the reciprocal real parts of the spectral diagonal of a
//! block-circulant Hessian approximation, so `P` approximates the inverse
//! Hessian and `C^T H C` is close to the identity on its spectral diagonal.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::circulant::{BlockCirculantOp, BlockDft};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};
use crate::ops::LinOp;

/// An SPD metric `P` with a fast inverse. Solvers use `P` to scale
/// directions and `P^{-1}` as the inner product of the scaled space.
pub trait Metric: LinOp {
    fn apply_inverse(&self, x: &[f64]) -> Vec<f64>;

    /// True when `P = I` exactly; lets callers skip work without changing results.
    fn is_identity(&self) -> bool {
        false
    }
}

/// The Euclidean metric.
#[derive(Debug, Clone, Copy)]
pub struct IdentityMetric {
    n: usize,
}

impl IdentityMetric {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinOp for IdentityMetric {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

impl Metric for IdentityMetric {
    fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn is_identity(&self) -> bool {
        true
    }
}

/// A dense SPD metric with a precomputed inverse, for small problems.
#[derive(Debug, Clone)]
pub struct DenseMetric {
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
}

impl DenseMetric {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        check_len("DenseMetric (square)", p.nrows(), p.ncols())?;
        let chol = p
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("metric matrix is not SPD".into()))?;
        Ok(Self {
            p_inv: chol.inverse(),
            p,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }
}

impl LinOp for DenseMetric {
    fn nrows(&self) -> usize {
        self.p.nrows()
    }
    fn ncols(&self) -> usize {
        self.p.ncols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.p * nalgebra::DVector::from_column_slice(x)).data.into()
    }
    fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        (self.p.transpose() * nalgebra::DVector::from_column_slice(x)).data.into()
    }
}

impl Metric for DenseMetric {
    fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        (&self.p_inv * nalgebra::DVector::from_column_slice(x)).data.into()
    }
}

/// Relative floor below which a spectral diagonal entry counts as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-12;
/// Largest tolerated imaginary residue, relative to the input norm.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Spectral {
    dft: BlockDft,
    t: Vec<f64>,
    t_inv: Vec<f64>,
    t_sqrt: Vec<f64>,
    t_isqrt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Power {
    One,
    MinusOne,
    Half,
    MinusHalf,
}

/// The scaling pair `(C, P)`. `t` is stored in DFT ordering (`k * s + c`).
#[derive(Debug, Clone)]
pub struct ScalingOp {
    n_b: usize,
    s: usize,
    // None means t = 1: every map is the identity and is applied as a copy.
    spectral: Option<Spectral>,
}

impl ScalingOp {
    pub fn identity(n_b: usize, s: usize) -> Self {
        Self {
            n_b,
            s,
            spectral: None,
        }
    }

    /// Build from an explicit positive spectral diagonal.
    pub fn from_spectral_diagonal(n_b: usize, s: usize, t: Vec<f64>) -> Result<Self> {
        check_len("ScalingOp::from_spectral_diagonal", n_b * s, t.len())?;
        if let Some((i, &v)) = t.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::DegenerateScaling {
                index: i,
                value: v,
                floor: 0.0,
            });
        }
        let spectral = Spectral {
            dft: BlockDft::new(n_b, s),
            t_inv: t.iter().map(|v| 1.0 / v).collect(),
            t_sqrt: t.iter().map(|v| v.sqrt()).collect(),
            t_isqrt: t.iter().map(|v| 1.0 / v.sqrt()).collect(),
            t,
        };
        Ok(Self {
            n_b,
            s,
            spectral: Some(spectral),
        })
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn block_size(&self) -> usize {
        self.s
    }
    pub fn len(&self) -> usize {
        self.n_b * self.s
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spectral diagonal `t` (all ones for the identity scaling).
    pub fn t(&self) -> Vec<f64> {
        match &self.spectral {
            Some(sp) => sp.t.clone(),
            None => vec![1.0; self.len()],
        }
    }

    fn apply_power(&self, x: &[f64], power: Power) -> Result<Vec<f64>> {
        check_len("ScalingOp apply", self.len(), x.len())?;
        let Some(sp) = &self.spectral else {
            return Ok(x.to_vec());
        };
        let w = match power {
            Power::One => &sp.t,
            Power::MinusOne => &sp.t_inv,
            Power::Half => &sp.t_sqrt,
            Power::MinusHalf => &sp.t_isqrt,
        };
        let mut xh = sp.dft.forward(x);
        for (z, wi) in xh.iter_mut().zip(w) {
            *z *= *wi;
        }
        let y: Vec<Complex64> = sp.dft.inverse(&xh);
        let imag = y.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        let bound = IMAG_RESIDUE_TOL * norm(x);
        if imag > bound && imag > f64::MIN_POSITIVE {
            return Err(Error::Internal(format!(
                "imaginary residue {imag:e} exceeds {bound:e} after scaling apply"
            )));
        }
        Ok(y.into_iter().map(|z| z.re).collect())
    }

    /// `P x`
    pub fn apply_p(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_power(x, Power::One)
    }
    /// `P^{-1} x`
    pub fn apply_pinv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_power(x, Power::MinusOne)
    }
    /// `C x` (`C` is symmetric, so this is also `C^T x`).
    pub fn apply_c(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_power(x, Power::Half)
    }
    /// `C^{-1} x`
    pub fn apply_cinv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_power(x, Power::MinusHalf)
    }

    /// `<x, P^{-1} z>`
    pub fn scaled_inner(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_len("scaled_inner", x.len(), z.len())?;
        Ok(dot(x, &self.apply_pinv(z)?))
    }
}

/// Build the scaling from a block-circulant Hessian approximation.
///
/// Uses the real part of the spectral diagonal `diag(F H F*)`, averages
/// conjugate frequency pairs and inverts. Entries at or below
/// `1e-12 * max` are rejected.
pub fn build_scaling(h: &BlockCirculantOp) -> Result<ScalingOp> {
    check_len("build_scaling (square blocks)", h.s_in(), h.s_out())?;
    let (n, s) = (h.n_b(), h.s_in());
    let diag = h.spectral_diagonal()?;
    let mut re: Vec<f64> = diag.iter().map(|z| z.re).collect();
    for k in 0..n {
        let kk = (n - k) % n;
        if kk <= k {
            continue;
        }
        for c in 0..s {
            let avg = 0.5 * (re[k * s + c] + re[kk * s + c]);
            re[k * s + c] = avg;
            re[kk * s + c] = avg;
        }
    }
    let max = re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = DEGENERACY_FLOOR * max.max(0.0);
    if let Some((i, &v)) = re
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > floor && v.is_finite()))
    {
        return Err(Error::DegenerateScaling {
            index: i,
            value: v,
            floor,
        });
    }
    ScalingOp::from_spectral_diagonal(n, s, re.iter().map(|v| 1.0 / v).collect())
}

impl LinOp for ScalingOp {
    fn nrows(&self) -> usize {
        self.len()
    }
    fn ncols(&self) -> usize {
        self.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.apply_p(x).expect("scaling apply")
    }
    fn apply_adjoint(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
}

impl Metric for ScalingOp {
    fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        self.apply_pinv(x).expect("scaling inverse apply")
    }
    fn is_identity(&self) -> bool {
        self.spectral.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::to_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    /// `A^T A + 0.1 I` built from random dense blocks: SPD block-circulant.
    fn spd_bc(rng: &mut ChaCha8Rng, n_b: usize, s: usize) -> BlockCirculantOp {
        let blocks: Vec<_> = (0..n_b)
            .map(|j| {
                let amp = 1.0 / (1.0 + j as f64);
                DMatrix::from_fn(s, s, |_, _| amp * rng.random_range(-1.0..1.0))
            })
            .collect();
        let a = BlockCirculantOp::from_dense_blocks(&blocks).unwrap();
        let reg = vec![0.1; s];
        let w = vec![1.0; s];
        let id = BlockCirculantOp::identity(n_b, s).unwrap();
        crate::circulant::gram_sum(&[
            crate::circulant::GramTerm { op: &a, weights: &w, coeff: 1.0 },
            crate::circulant::GramTerm { op: &id, weights: &reg, coeff: 1.0 },
        ])
        .unwrap()
    }

    fn cond(m: &DMatrix<f64>) -> f64 {
        let e = m.clone().symmetric_eigen().eigenvalues;
        e.max() / e.min()
    }

    #[test]
    fn two_by_two_circulant_inverse_is_exact() {
        let h = BlockCirculantOp::from_dense_blocks(&[
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::from_element(1, 1, 1.0),
        ])
        .unwrap();
        let sc = build_scaling(&h).unwrap();
        let t = sc.t();
        assert!((t[0] - 0.25).abs() < 1e-15 && (t[1] - 0.5).abs() < 1e-15);
        let p = to_dense(&sc);
        let want = DMatrix::from_row_slice(2, 2, &[0.375, -0.125, -0.125, 0.375]);
        assert!((p - want).abs().max() < 1e-14);
    }

    #[test]
    fn identity_hessian_gives_identity_maps() {
        let h = BlockCirculantOp::from_dense_blocks(&[
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 3),
            DMatrix::zeros(3, 3),
        ])
        .unwrap();
        let sc = build_scaling(&h).unwrap();
        assert!(sc.t().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 12);
        for y in [
            sc.apply_p(&x).unwrap(),
            sc.apply_pinv(&x).unwrap(),
            sc.apply_c(&x).unwrap(),
            sc.apply_cinv(&x).unwrap(),
        ] {
            assert!(close(&y, &x, 1e-14));
        }
        let id = ScalingOp::identity(4, 3);
        assert!(id.is_identity());
        assert_eq!(id.apply_p(&x).unwrap(), x);
        assert_eq!(id.scaled_inner(&x, &x).unwrap(), dot(&x, &x));
    }

    #[test]
    fn inverse_and_square_root_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = spd_bc(&mut rng, 16, 3);
        let sc = build_scaling(&h).unwrap();
        for _ in 0..20 {
            let x = rand_vec(&mut rng, 48);
            let back = sc.apply_pinv(&sc.apply_p(&x).unwrap()).unwrap();
            assert!(close(&back, &x, 1e-12));
            let cc = sc.apply_c(&sc.apply_c(&x).unwrap()).unwrap();
            assert!(close(&cc, &sc.apply_p(&x).unwrap(), 1e-12));
            let z = rand_vec(&mut rng, 48);
            let lhs = sc.scaled_inner(&x, &z).unwrap();
            let rhs = dot(&sc.apply_cinv(&x).unwrap(), &sc.apply_cinv(&z).unwrap());
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
            assert!(sc.scaled_inner(&x, &x).unwrap() > 0.0);
        }
    }

    #[test]
    fn scaling_improves_conditioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = spd_bc(&mut rng, 8, 4);
        let sc = build_scaling(&h).unwrap();
        let hd = to_dense(&h);
        let mut c = DMatrix::zeros(32, 32);
        for j in 0..32 {
            let mut e = vec![0.0; 32];
            e[j] = 1.0;
            c.set_column(j, &nalgebra::DVector::from_vec(sc.apply_c(&e).unwrap()));
        }
        let chc = c.transpose() * &hd * &c;
        assert!(cond(&chc) < cond(&hd));
    }

    #[test]
    fn degenerate_hessian_is_rejected() {
        let h = BlockCirculantOp::from_dense_blocks(&[
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        ])
        .unwrap();
        assert!(matches!(build_scaling(&h), Err(Error::DegenerateScaling { .. })));
    }

    #[test]
    fn dense_metric_inverse() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let m = DenseMetric::new(p).unwrap();
        let y = m.apply_inverse(&m.apply(&[1.0, -2.0]));
        assert!(close(&y, &[1.0, -2.0], 1e-14));
        assert!(DenseMetric::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }
}
