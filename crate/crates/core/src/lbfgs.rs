//! Compact limited-memory BFGS with a metric-based initial matrix.
//!
//! `B = θ P^{-1} - W M W^T` with `W = [Y, θ P^{-1} S]` and
//! `M^{-1} = [[-D, L^T], [L, θ S^T P^{-1} S]]`, where `D` is the diagonal and
//! `L` the strict lower triangle of `S^T Y`. Without a metric, `P = I`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm, scale};
use crate::ops::{FaceMask, LinOp};
use crate::scaling::Metric;

/// Pairs with `s^T y <= CURVATURE_EPS ‖s‖ ‖y‖` are skipped.
pub const CURVATURE_EPS: f64 = 1e-10;

/// How the initial-matrix scalar is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaRule {
    /// `θ = y^T P y / y^T s` from the most recent pair.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Accepted,
    Skipped,
}

pub struct CompactLBFGS<'a> {
    n: usize,
    memory: usize,
    metric: Option<&'a dyn Metric>,
    rule: ThetaRule,
    theta: f64,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    pinv_s: VecDeque<Vec<f64>>,
    sty: DMatrix<f64>,
    st_pinv_s: DMatrix<f64>,
    middle: Option<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> CompactLBFGS<'a> {
    pub fn new(n: usize, memory: usize, metric: Option<&'a dyn Metric>, rule: ThetaRule) -> Result<Self> {
        if memory == 0 {
            return Err(Error::Config("L-BFGS memory must be at least 1".into()));
        }
        if let Some(m) = metric {
            check_len("CompactLBFGS metric", n, m.ncols())?;
        }
        let theta = match rule {
            ThetaRule::Auto => 1.0,
            ThetaRule::Fixed(t) if t > 0.0 => t,
            ThetaRule::Fixed(t) => return Err(Error::Config(format!("theta must be positive, got {t}"))),
        };
        Ok(Self {
            n,
            memory,
            metric: metric.filter(|m| !m.is_identity()),
            rule,
            theta,
            s: VecDeque::new(),
            y: VecDeque::new(),
            pinv_s: VecDeque::new(),
            sty: DMatrix::zeros(0, 0),
            st_pinv_s: DMatrix::zeros(0, 0),
            middle: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn memory(&self) -> usize {
        self.memory
    }
    pub fn n_pairs(&self) -> usize {
        self.s.len()
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.s.iter().zip(&self.y).map(|(s, y)| (s.as_slice(), y.as_slice()))
    }
    /// True when the initial matrix is a multiple of the identity.
    pub fn has_scalar_initial(&self) -> bool {
        self.metric.is_none()
    }

    fn pinv(&self, v: &[f64]) -> Vec<f64> {
        match self.metric {
            Some(m) => m.apply_inverse(v),
            None => v.to_vec(),
        }
    }

    fn p(&self, v: &[f64]) -> Vec<f64> {
        match self.metric {
            Some(m) => m.apply(v),
            None => v.to_vec(),
        }
    }

    /// Add the pair `(s, y)` unless it fails the curvature test.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> Result<UpdateOutcome> {
        check_len("lbfgs_update s", self.n, s.len())?;
        check_len("lbfgs_update y", self.n, y.len())?;
        let sy = dot(s, y);
        if !(sy > CURVATURE_EPS * norm(s) * norm(y)) {
            return Ok(UpdateOutcome::Skipped);
        }
        let saved = (
            self.s.clone(),
            self.y.clone(),
            self.pinv_s.clone(),
            self.sty.clone(),
            self.st_pinv_s.clone(),
            self.theta,
        );
        if self.s.len() == self.memory {
            self.s.pop_front();
            self.y.pop_front();
            self.pinv_s.pop_front();
            self.sty = self.sty.clone().remove_row(0).remove_column(0);
            self.st_pinv_s = self.st_pinv_s.clone().remove_row(0).remove_column(0);
        }
        let ps = self.pinv(s);
        let k = self.s.len();
        let mut sty = self.sty.clone().insert_row(k, 0.0).insert_column(k, 0.0);
        let mut spp = self.st_pinv_s.clone().insert_row(k, 0.0).insert_column(k, 0.0);
        for i in 0..k {
            sty[(i, k)] = dot(&self.s[i], y);
            sty[(k, i)] = dot(s, &self.y[i]);
            let v = dot(&self.s[i], &ps);
            spp[(i, k)] = v;
            spp[(k, i)] = v;
        }
        sty[(k, k)] = sy;
        spp[(k, k)] = dot(s, &ps);
        self.s.push_back(s.to_vec());
        self.y.push_back(y.to_vec());
        self.pinv_s.push_back(ps);
        self.sty = sty;
        self.st_pinv_s = spp;
        if let ThetaRule::Auto = self.rule {
            self.theta = dot(y, &self.p(y)) / sy;
        }
        if let Err(e) = self.refactor() {
            (self.s, self.y, self.pinv_s, self.sty, self.st_pinv_s, self.theta) = saved;
            self.refactor()?;
            return Err(e);
        }
        Ok(UpdateOutcome::Accepted)
    }

    /// `M^{-1}`, the `2k x 2k` middle matrix in inverse form.
    pub fn middle_inverse(&self) -> DMatrix<f64> {
        let k = self.s.len();
        let mut m = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            m[(i, i)] = -self.sty[(i, i)];
            for j in 0..i {
                // L_ij = s_i^T y_j for i > j.
                m[(k + i, j)] = self.sty[(i, j)];
                m[(j, k + i)] = self.sty[(i, j)];
            }
            for j in 0..k {
                m[(k + i, k + j)] = self.theta * self.st_pinv_s[(i, j)];
            }
        }
        m
    }

    fn refactor(&mut self) -> Result<()> {
        if self.s.is_empty() {
            self.middle = None;
            return Ok(());
        }
        let lu = self.middle_inverse().lu();
        if !lu.is_invertible() {
            return Err(Error::Internal("singular L-BFGS middle matrix".into()));
        }
        self.middle = Some(lu);
        Ok(())
    }

    /// `W^T v` as a `2k` vector.
    fn wt(&self, v: &[f64]) -> DVector<f64> {
        let k = self.s.len();
        DVector::from_fn(2 * k, |i, _| {
            if i < k {
                dot(&self.y[i], v)
            } else {
                self.theta * dot(&self.pinv_s[i - k], v)
            }
        })
    }

    /// `out -= W z`
    fn sub_w(&self, z: &DVector<f64>, out: &mut [f64]) {
        let k = self.s.len();
        for i in 0..k {
            axpy(-z[i], &self.y[i], out);
            axpy(-self.theta * z[k + i], &self.pinv_s[i], out);
        }
    }

    /// `B v`
    pub fn apply_b(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "CompactLBFGS::apply length");
        let mut out = scale(self.theta, &self.pinv(v));
        if let Some(lu) = &self.middle {
            let z = lu.solve(&self.wt(v)).expect("middle matrix factorized at update");
            self.sub_w(&z, &mut out);
        }
        out
    }

    /// `-B_FF^{-1} g_F` by Sherman-Morrison-Woodbury, returned full length.
    ///
    /// Needs a scalar initial matrix. A singular inner system is an
    /// `Internal` error; callers fall back to CG.
    pub fn smw_subspace_solve(&self, g: &[f64], mask: &FaceMask) -> Result<Vec<f64>> {
        check_len("smw_subspace_solve g", self.n, g.len())?;
        check_len("smw_subspace_solve mask", self.n, mask.len())?;
        if self.metric.is_some() {
            return Err(Error::Config("SMW subspace solve needs a scalar initial matrix".into()));
        }
        let th = self.theta;
        let gf = masked(mask, g);
        let mut out = scale(-1.0 / th, &gf);
        let k = self.s.len();
        if k > 0 {
            // Columns of W restricted to the face.
            let cols: Vec<Vec<f64>> = (0..2 * k)
                .map(|i| {
                    let c = if i < k { scale(1.0, &self.y[i]) } else { scale(th, &self.pinv_s[i - k]) };
                    masked(mask, &c)
                })
                .collect();
            let mut inner = self.middle_inverse();
            for i in 0..2 * k {
                for j in 0..2 * k {
                    inner[(i, j)] -= dot(&cols[i], &cols[j]) / th;
                }
            }
            let rhs = DVector::from_fn(2 * k, |i, _| dot(&cols[i], &gf));
            let lu = inner.lu();
            let z = lu
                .solve(&rhs)
                .filter(|z| z.iter().all(|v| v.is_finite()))
                .ok_or_else(|| Error::Internal("singular SMW inner system".into()))?;
            for (i, c) in cols.iter().enumerate() {
                axpy(-z[i] / (th * th), c, &mut out);
            }
        }
        Ok(out)
    }
}

fn masked(mask: &FaceMask, v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    mask.zero_fixed(&mut out);
    out
}

impl LinOp for CompactLBFGS<'_> {
    fn nrows(&self) -> usize {
        self.n
    }
    fn ncols(&self) -> usize {
        self.n
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_b(v)
    }
    fn apply_adjoint(&self, v: &[f64]) -> Vec<f64> {
        self.apply_b(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::to_dense;
    use crate::scaling::{build_scaling, DenseMetric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.transpose() * a / n as f64 + DMatrix::identity(n, n) * 0.5
    }

    /// Pairs from a fixed SPD Hessian, so the curvature condition holds.
    fn pair(rng: &mut ChaCha8Rng, h: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let s = rand_vec(rng, h.nrows());
        let y = (h * DVector::from_vec(s.clone())).data.into();
        (s, y)
    }

    fn dense_bfgs(b0: DMatrix<f64>, pairs: &[(Vec<f64>, Vec<f64>)]) -> DMatrix<f64> {
        let mut b = b0;
        for (s, y) in pairs {
            let sv = DVector::from_column_slice(s);
            let yv = DVector::from_column_slice(y);
            let bs = &b * &sv;
            b = &b - &bs * bs.transpose() / sv.dot(&bs) + &yv * yv.transpose() / yv.dot(&sv);
        }
        b
    }

    #[test]
    fn theta_examples() {
        let mut op = CompactLBFGS::new(2, 5, None, ThetaRule::Auto).unwrap();
        op.update(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((op.theta() - 2.0 / 3.0).abs() < 1e-15);
        let p = DenseMetric::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]))).unwrap();
        let mut op = CompactLBFGS::new(2, 5, Some(&p), ThetaRule::Auto).unwrap();
        op.update(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((op.theta() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curvature_violation_is_skipped() {
        let mut op = CompactLBFGS::new(2, 5, None, ThetaRule::Auto).unwrap();
        assert_eq!(op.update(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), UpdateOutcome::Skipped);
        assert_eq!(op.n_pairs(), 0);
        assert_eq!(op.apply_b(&[1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn one_pair_hand_example() {
        let mut op = CompactLBFGS::new(2, 5, None, ThetaRule::Fixed(1.0)).unwrap();
        op.update(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        let bv = op.apply_b(&[1.0, 1.0]);
        assert!((bv[0] - 2.0).abs() < 1e-14 && (bv[1] - 1.0).abs() < 1e-14);
        let d = op.smw_subspace_solve(&[2.0, 1.0], &FaceMask::all_free(2)).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-14 && (d[1] + 1.0).abs() < 1e-14);
        let empty = CompactLBFGS::new(3, 5, None, ThetaRule::Fixed(2.0)).unwrap();
        assert_eq!(empty.smw_subspace_solve(&[2.0, -4.0, 1.0], &FaceMask::all_free(3)).unwrap(), vec![-1.0, 2.0, -0.5]);
    }

    #[test]
    fn matches_dense_recursive_bfgs_and_secant() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 30;
        let pm = DenseMetric::new(random_spd(&mut rng, n)).unwrap();
        let h = random_spd(&mut rng, n) * 3.0;
        let mut op = CompactLBFGS::new(n, 5, Some(&pm), ThetaRule::Auto).unwrap();
        let mut kept: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for _ in 0..8 {
            let (s, y) = pair(&mut rng, &h);
            assert_eq!(op.update(&s, &y).unwrap(), UpdateOutcome::Accepted);
            kept.push((s.clone(), y.clone()));
            if kept.len() > 5 {
                kept.remove(0);
            }
            let bs = op.apply_b(&s);
            for (a, b) in bs.iter().zip(&y) {
                assert!((a - b).abs() < 1e-9);
            }
            let pinv = pm.matrix().clone().try_inverse().unwrap();
            let want = dense_bfgs(pinv * op.theta(), &kept);
            let got = to_dense(&op);
            assert!((got - &want).abs().max() < 1e-10 * want.abs().max());
            let v = rand_vec(&mut rng, n);
            assert!(dot(&v, &op.apply_b(&v)) > 0.0);
        }
    }

    #[test]
    fn scaled_space_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (n_b, s) = (5, 4);
        let n = n_b * s;
        let blocks: Vec<_> = (0..n_b)
            .map(|j| DMatrix::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0) / (1.0 + j as f64)))
            .collect();
        let a = crate::circulant::BlockCirculantOp::from_dense_blocks(&blocks).unwrap();
        let id = crate::circulant::BlockCirculantOp::identity(n_b, s).unwrap();
        let h_bc = crate::circulant::gram_sum(&[
            crate::circulant::GramTerm { op: &a, weights: &vec![1.0; s], coeff: 1.0 },
            crate::circulant::GramTerm { op: &id, weights: &vec![1.0; s], coeff: 0.2 },
        ])
        .unwrap();
        let sc = build_scaling(&h_bc).unwrap();
        let h = random_spd(&mut rng, n);
        let mut op = CompactLBFGS::new(n, 4, Some(&sc), ThetaRule::Auto).unwrap();
        let mut plain = CompactLBFGS::new(n, 4, None, ThetaRule::Auto).unwrap();
        for _ in 0..6 {
            let (sv, yv) = pair(&mut rng, &h);
            op.update(&sv, &yv).unwrap();
            plain
                .update(&sc.apply_cinv(&sv).unwrap(), &sc.apply_c(&yv).unwrap())
                .unwrap();
        }
        assert!((op.theta() - plain.theta()).abs() < 1e-10 * op.theta());
        let c = DMatrix::from_fn(n, n, |i, j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            sc.apply_c(&e).unwrap()[i]
        });
        let lhs = to_dense(&plain);
        let rhs = c.transpose() * to_dense(&op) * c;
        assert!((lhs - &rhs).abs().max() < 1e-8 * rhs.abs().max());
    }

    #[test]
    fn smw_matches_dense_face_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 25;
        let h = random_spd(&mut rng, n);
        let mut op = CompactLBFGS::new(n, 4, None, ThetaRule::Auto).unwrap();
        for _ in 0..6 {
            let (s, y) = pair(&mut rng, &h);
            op.update(&s, &y).unwrap();
        }
        let free: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let mask = FaceMask::new(free);
        let g = rand_vec(&mut rng, n);
        let got = op.smw_subspace_solve(&g, &mask).unwrap();
        let idx = mask.free_indices().to_vec();
        let b = to_dense(&op);
        let bff = DMatrix::from_fn(idx.len(), idx.len(), |i, j| b[(idx[i], idx[j])]);
        let gf = DVector::from_iterator(idx.len(), idx.iter().map(|&i| g[i]));
        let want = -bff.lu().solve(&gf).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            assert!((got[i] - want[k]).abs() < 1e-9 * (1.0 + want[k].abs()));
        }
        assert!((0..n).filter(|&i| !mask.is_free(i)).all(|i| got[i] == 0.0));
        let scaled = DenseMetric::new(random_spd(&mut rng, n)).unwrap();
        let op2 = CompactLBFGS::new(n, 4, Some(&scaled), ThetaRule::Auto).unwrap();
        assert!(op2.smw_subspace_solve(&g, &mask).is_err());
    }
}
