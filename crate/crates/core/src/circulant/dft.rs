//! Unitary DFT applied across the block index.
//!
//! Vectors are laid out block by block: entry `j * s + c` is coordinate `c`
//! of block `j`. The transform `F` maps block sequences to frequencies with
//! kernel `exp(+2 pi i k j / n_b) / sqrt(n_b)`, which is the sign for which
//! `F A F*` has diagonal blocks `sum_j a_j exp(-2 pi i k j / n_b)` when block
//! `(i, j)` of `A` is `a_{(j - i) mod n_b}`. `F*` is the inverse.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};

/// Planned blockwise transform for a fixed `(n_b, s)`.
#[derive(Clone)]
pub struct BlockDft {
    n_b: usize,
    s: usize,
    // Kernel exp(+i...) realizes F, exp(-i...) realizes F*.
    plus: Arc<dyn Fft<f64>>,
    minus: Arc<dyn Fft<f64>>,
    norm: f64,
}

impl std::fmt::Debug for BlockDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockDft")
            .field("n_b", &self.n_b)
            .field("s", &self.s)
            .finish()
    }
}

impl BlockDft {
    pub fn new(n_b: usize, s: usize) -> Self {
        assert!(n_b > 0 && s > 0, "BlockDft needs positive sizes");
        let mut planner = FftPlanner::new();
        Self {
            n_b,
            s,
            plus: planner.plan_fft_inverse(n_b),
            minus: planner.plan_fft_forward(n_b),
            norm: 1.0 / (n_b as f64).sqrt(),
        }
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
        false
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, x: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        let (n_b, s) = (self.n_b, self.s);
        // Coordinate-major staging so one call transforms all s sequences.
        let mut buf = vec![Complex64::default(); n_b * s];
        for j in 0..n_b {
            for c in 0..s {
                buf[c * n_b + j] = x(j * s + c);
            }
        }
        fft.process(&mut buf);
        let mut out = vec![Complex64::default(); n_b * s];
        for c in 0..s {
            for k in 0..n_b {
                out[k * s + c] = buf[c * n_b + k] * self.norm;
            }
        }
        out
    }

    /// `F x` for real `x`.
    pub fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len(), "BlockDft::forward length");
        self.run(&self.plus, |i| Complex64::new(x[i], 0.0))
    }

    /// `F x` for complex `x`.
    pub fn forward_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len(), "BlockDft::forward_complex length");
        self.run(&self.plus, |i| x[i])
    }

    /// `F* x`.
    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.len(), "BlockDft::inverse length");
        self.run(&self.minus, |i| x[i])
    }
}

/// Unitary blockwise DFT `F x`.
pub fn blockwise_dft(x: &[f64], n_b: usize, s: usize) -> Result<Vec<Complex64>> {
    check_len("blockwise_dft", n_b * s, x.len())?;
    Ok(BlockDft::new(n_b, s).forward(x))
}

/// Inverse unitary blockwise DFT `F* x`.
pub fn blockwise_idft(x: &[Complex64], n_b: usize, s: usize) -> Result<Vec<Complex64>> {
    check_len("blockwise_idft", n_b * s, x.len())?;
    Ok(BlockDft::new(n_b, s).inverse(x))
}
