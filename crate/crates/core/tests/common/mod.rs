#![allow(dead_code)]

use cylscale::model::DenseQuadratic;
use cylscale::scaling::DenseMetric;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.transpose() * a + DMatrix::identity(n, n) * shift
}

/// A random strictly convex quadratic whose minimizer over `x >= 0` has a
/// mix of active and inactive bounds.
pub struct BoundQuadratic {
    pub f: DenseQuadratic,
    pub q: DMatrix<f64>,
    pub c: Vec<f64>,
}

pub fn random_bound_quadratic(rng: &mut ChaCha8Rng, n: usize) -> BoundQuadratic {
    let q = random_spd(rng, n, 0.5);
    let c = rand_vec(rng, n, -2.0, 2.0);
    BoundQuadratic {
        f: DenseQuadratic::new(q.clone(), c.clone()).unwrap(),
        q,
        c,
    }
}

/// Minimizer of `½ xᵀQx + cᵀx` over `x >= 0` by trying every set of free
/// coordinates and keeping the one that satisfies the optimality conditions.
pub fn enumerate_active_sets(q: &DMatrix<f64>, c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for bits in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
        let mut x = vec![0.0; n];
        if !free.is_empty() {
            let qff = DMatrix::from_fn(free.len(), free.len(), |i, j| q[(free[i], free[j])]);
            let rhs = DVector::from_fn(free.len(), |i, _| -c[free[i]]);
            let Some(sol) = qff.cholesky().map(|ch| ch.solve(&rhs)) else {
                continue;
            };
            for (k, &i) in free.iter().enumerate() {
                x[i] = sol[k];
            }
        }
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let xv = DVector::from_column_slice(&x);
        let g = q * &xv + DVector::from_column_slice(c);
        let kkt = (0..n).all(|i| bits & (1 << i) != 0 || g[i] >= -1e-10);
        if !kkt {
            continue;
        }
        let fval = 0.5 * xv.dot(&(q * &xv)) + xv.dot(&DVector::from_column_slice(c));
        if best.as_ref().is_none_or(|(bf, _)| fval < *bf) {
            best = Some((fval, x.iter().map(|&v| v.max(0.0)).collect()));
        }
    }
    best.expect("a strictly convex problem has a KKT point").1
}

pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> DenseMetric {
    DenseMetric::new(random_spd(rng, n, 0.5)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
