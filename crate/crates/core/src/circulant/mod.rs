//! Block-circulant operators stored by their first block-row.
//!
//! Block `(i, j)` of the operator is `first_block_row[(j - i) mod n_b]`. Each
//! block is a sparse `s_out x s_in` matrix in compressed-column layout.
//! Products are computed blockwise in the spatial domain; the blockwise DFT
//! (see [`dft`]) block-diagonalizes the operator.

pub mod dft;
pub mod io;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::ops::LinOp;

pub use dft::{blockwise_dft, blockwise_idft, BlockDft};

/// Sparse matrix in compressed-column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBlock {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from raw CSC arrays, validating the structure.
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
            return Err(Error::Format("column pointer array malformed".into()));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Format("column pointers not monotone".into()));
        }
        let nnz = col_ptr[ncols];
        if row_idx.len() != nnz || values.len() != nnz {
            return Err(Error::Format("nnz does not match index/value arrays".into()));
        }
        if row_idx.iter().any(|&r| r >= nrows) {
            return Err(Error::Format("row index out of range".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// entries with `|v| <= drop_tol` are discarded.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
        drop_tol: f64,
    ) -> Self {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet out of range");
            cols[c].push((r, v));
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for mut col in cols {
            col.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < col.len() {
                let r = col[i].0;
                let mut v = 0.0;
                while i < col.len() && col[i].0 == r {
                    v += col[i].1;
                    i += 1;
                }
                if v.abs() > drop_tol {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn from_dense(mat: &DMatrix<f64>, drop_tol: f64) -> Self {
        let trip = (0..mat.ncols())
            .flat_map(|c| (0..mat.nrows()).map(move |r| (r, c)))
            .map(|(r, c)| (r, c, mat[(r, c)]));
        Self::from_triplets(mat.nrows(), mat.ncols(), trip, drop_tol)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }
    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterate `(row, col, value)` over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .iter()
            .position(|&ri| ri == r)
            .map_or(0.0, |p| self.values[range.start + p])
    }

    /// `y += B x`
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    /// `y += B^T x`
    pub fn tr_mul_add(&self, x: &[f64], y: &mut [f64]) {
        for (c, yc) in y.iter_mut().enumerate().take(self.ncols) {
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.values[k] * x[self.row_idx[k]];
            }
            *yc += acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(r, c, v)| (c, r, v)),
            0.0,
        )
    }
}

/// Block-circulant operator of shape `(n_b * s_out) x (n_b * s_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCirculantOp {
    n_b: usize,
    s_in: usize,
    s_out: usize,
    blocks: Vec<SparseBlock>,
}

impl BlockCirculantOp {
    /// Build from the first block-row; all blocks must share one shape.
    pub fn new(first_block_row: Vec<SparseBlock>) -> Result<Self> {
        let n_b = first_block_row.len();
        if n_b == 0 {
            return Err(Error::Config("block-circulant operator needs at least one block".into()));
        }
        let (s_out, s_in) = (first_block_row[0].nrows(), first_block_row[0].ncols());
        if s_out == 0 || s_in == 0 {
            return Err(Error::Config("block sizes must be positive".into()));
        }
        for b in &first_block_row {
            check_len("block-circulant block rows", s_out, b.nrows())?;
            check_len("block-circulant block cols", s_in, b.ncols())?;
        }
        Ok(Self {
            n_b,
            s_in,
            s_out,
            blocks: first_block_row,
        })
    }

    /// Identity with `n_b` blocks of size `s`.
    pub fn identity(n_b: usize, s: usize) -> Result<Self> {
        let id = SparseBlock::from_triplets(s, s, (0..s).map(|i| (i, i, 1.0)), 0.0);
        Self::new(
            std::iter::once(id)
                .chain((1..n_b).map(|_| SparseBlock::zeros(s, s)))
                .collect(),
        )
    }

    pub fn from_dense_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        Self::new(blocks.iter().map(|b| SparseBlock::from_dense(b, 0.0)).collect())
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }
    pub fn s_in(&self) -> usize {
        self.s_in
    }
    pub fn s_out(&self) -> usize {
        self.s_out
    }
    pub fn first_block_row(&self) -> &[SparseBlock] {
        &self.blocks
    }
    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(SparseBlock::nnz).sum()
    }

    /// Block `(i, j)` of the full operator.
    pub fn block(&self, i: usize, j: usize) -> &SparseBlock {
        &self.blocks[(j + self.n_b - i % self.n_b) % self.n_b]
    }

    /// `y = A x`, returning a dimension error instead of panicking.
    pub fn bc_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("bc_apply", self.n_b * self.s_in, x.len())?;
        Ok(self.apply(x))
    }

    /// Adjoint as a block-circulant operator: transposed, index-reversed blocks.
    pub fn adjoint(&self) -> Self {
        let blocks = (0..self.n_b)
            .map(|k| self.blocks[(self.n_b - k) % self.n_b].transpose())
            .collect();
        Self {
            n_b: self.n_b,
            s_in: self.s_out,
            s_out: self.s_in,
            blocks,
        }
    }

    /// Spectral block `Â_k = sum_j a_j exp(-2 pi i k j / n_b)`.
    pub fn spectral_block(&self, k: usize) -> DMatrix<Complex64> {
        let n = self.n_b;
        let mut out = DMatrix::from_element(self.s_out, self.s_in, Complex64::default());
        for (j, b) in self.blocks.iter().enumerate() {
            let w = twiddle(n, (k * j) % n);
            for (r, c, v) in b.iter() {
                out[(r, c)] += w * v;
            }
        }
        out
    }

    /// Diagonals of all spectral blocks, in DFT ordering (`k * s + c`).
    /// Requires square blocks.
    pub fn spectral_diagonal(&self) -> Result<Vec<Complex64>> {
        check_len("spectral_diagonal (square blocks)", self.s_in, self.s_out)?;
        let (n, s) = (self.n_b, self.s_in);
        // Sequence of the c-th diagonal entry over blocks, then one DFT per c.
        let mut seq = vec![0.0; n * s];
        for (j, b) in self.blocks.iter().enumerate() {
            for c in 0..s {
                seq[j * s + c] = b.get(c, c);
            }
        }
        // F uses exp(+...); Â_k needs exp(-...), i.e. sqrt(n) * F* of the sequence.
        let dft = BlockDft::new(n, s);
        let scale = (n as f64).sqrt();
        let seq_c: Vec<Complex64> = seq.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(dft.inverse(&seq_c).into_iter().map(|z| z * scale).collect())
    }
}

fn twiddle(n: usize, kj: usize) -> Complex64 {
    let ang = -2.0 * std::f64::consts::PI * kj as f64 / n as f64;
    Complex64::from_polar(1.0, ang)
}

impl LinOp for BlockCirculantOp {
    fn nrows(&self) -> usize {
        self.n_b * self.s_out
    }
    fn ncols(&self) -> usize {
        self.n_b * self.s_in
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols(), "BlockCirculantOp::apply length");
        let (n, si, so) = (self.n_b, self.s_in, self.s_out);
        let mut y = vec![0.0; n * so];
        for i in 0..n {
            let yi = &mut y[i * so..(i + 1) * so];
            for (m, b) in self.blocks.iter().enumerate() {
                if b.nnz() == 0 {
                    continue;
                }
                let j = (i + m) % n;
                b.mul_add(&x[j * si..(j + 1) * si], yi);
            }
        }
        y
    }
    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows(), "BlockCirculantOp::apply_adjoint length");
        let (n, si, so) = (self.n_b, self.s_in, self.s_out);
        let mut x = vec![0.0; n * si];
        for i in 0..n {
            let yi = &y[i * so..(i + 1) * so];
            for (m, b) in self.blocks.iter().enumerate() {
                if b.nnz() == 0 {
                    continue;
                }
                let j = (i + m) % n;
                b.tr_mul_add(yi, &mut x[j * si..(j + 1) * si]);
            }
        }
        x
    }
    fn as_block_circulant(&self) -> Option<&BlockCirculantOp> {
        Some(self)
    }
}

/// The dense diagonal blocks `Â_k` of `F A F*`.
#[derive(Debug, Clone)]
pub struct SpectralBlocks {
    s_in: usize,
    s_out: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

/// Block-diagonalize `A`, computing one spectral block at a time.
pub fn block_diagonalize(a: &BlockCirculantOp) -> SpectralBlocks {
    SpectralBlocks {
        s_in: a.s_in,
        s_out: a.s_out,
        blocks: (0..a.n_b).map(|k| a.spectral_block(k)).collect(),
    }
}

impl SpectralBlocks {
    pub fn n_b(&self) -> usize {
        self.blocks.len()
    }
    pub fn blocks(&self) -> &[DMatrix<Complex64>] {
        &self.blocks
    }
    pub fn block(&self, k: usize) -> &DMatrix<Complex64> {
        &self.blocks[k]
    }

    /// `blockdiag(Â_k) x̂` on a vector in DFT ordering.
    pub fn apply(&self, xh: &[Complex64]) -> Vec<Complex64> {
        let (n, si, so) = (self.n_b(), self.s_in, self.s_out);
        assert_eq!(xh.len(), n * si, "SpectralBlocks::apply length");
        let mut out = vec![Complex64::default(); n * so];
        for (k, blk) in self.blocks.iter().enumerate() {
            for r in 0..so {
                let mut acc = Complex64::default();
                for c in 0..si {
                    acc += blk[(r, c)] * xh[k * si + c];
                }
                out[k * so + r] = acc;
            }
        }
        out
    }

    /// Recover the real first block-row by inverse DFT over the block index.
    pub fn to_first_block_row(&self) -> Vec<DMatrix<f64>> {
        let n = self.n_b();
        (0..n)
            .map(|j| {
                let mut m = DMatrix::zeros(self.s_out, self.s_in);
                for (k, blk) in self.blocks.iter().enumerate() {
                    let w = twiddle(n, (k * j) % n).conj();
                    for c in 0..self.s_in {
                        for r in 0..self.s_out {
                            m[(r, c)] += (blk[(r, c)] * w).re;
                        }
                    }
                }
                m / n as f64
            })
            .collect()
    }
}

/// One term `coeff * A^T diag(w, ..., w) A` of a block-circulant Gram sum.
pub struct GramTerm<'a> {
    pub op: &'a BlockCirculantOp,
    /// Per-row weights within one block row (length `s_out`).
    pub weights: &'a [f64],
    pub coeff: f64,
}

/// `sum_t coeff_t A_t^T diag(w_t) A_t` as a block-circulant operator.
///
/// Computed in the spectral domain, `Ĝ_k = sum_t coeff_t Â_k^H W_t Â_k`, then
/// brought back to a first block-row by inverse DFT. Entries below
/// `1e-15 * max|entry|` are dropped from the sparse result.
pub fn gram_sum(terms: &[GramTerm<'_>]) -> Result<BlockCirculantOp> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Config("gram_sum needs at least one term".into()))?;
    let (n, s) = (first.op.n_b, first.op.s_in);
    for t in terms {
        check_len("gram_sum (n_b)", n, t.op.n_b)?;
        check_len("gram_sum (s_in)", s, t.op.s_in)?;
        check_len("gram_sum (weights)", t.op.s_out, t.weights.len())?;
    }
    let mut spec = Vec::with_capacity(n);
    for k in 0..n {
        let mut g = DMatrix::from_element(s, s, Complex64::default());
        for t in terms {
            let ak = t.op.spectral_block(k);
            let mut wa = ak.clone();
            for r in 0..t.op.s_out {
                let w = t.weights[r] * t.coeff;
                for c in 0..s {
                    wa[(r, c)] *= w;
                }
            }
            g += ak.adjoint() * wa;
        }
        spec.push(g);
    }
    let blocks = SpectralBlocks {
        s_in: s,
        s_out: s,
        blocks: spec,
    }
    .to_first_block_row();
    let maxabs = blocks
        .iter()
        .flat_map(|b| b.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-15 * maxabs;
    BlockCirculantOp::new(blocks.iter().map(|b| SparseBlock::from_dense(b, tol)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::to_dense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_bc(vals: &[f64]) -> BlockCirculantOp {
        BlockCirculantOp::from_dense_blocks(
            &vals
                .iter()
                .map(|&v| DMatrix::from_element(1, 1, v))
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    pub(crate) fn random_sparse_bc(
        rng: &mut ChaCha8Rng,
        n_b: usize,
        s_out: usize,
        s_in: usize,
        density: f64,
    ) -> BlockCirculantOp {
        let blocks = (0..n_b)
            .map(|_| {
                let trip: Vec<_> = (0..s_out)
                    .flat_map(|r| (0..s_in).map(move |c| (r, c)))
                    .filter_map(|(r, c)| {
                        rng.random_bool(density)
                            .then(|| (r, c, rng.random_range(-1.0..1.0)))
                    })
                    .collect();
                SparseBlock::from_triplets(s_out, s_in, trip, 0.0)
            })
            .collect();
        BlockCirculantOp::new(blocks).unwrap()
    }

    /// Dense materialization from the block definition, independent of `apply`.
    fn dense_from_blocks(a: &BlockCirculantOp) -> DMatrix<f64> {
        let (n, si, so) = (a.n_b(), a.s_in(), a.s_out());
        let mut m = DMatrix::zeros(n * so, n * si);
        for i in 0..n {
            for j in 0..n {
                let b = a.block(i, j).to_dense();
                m.view_mut((i * so, j * si), (so, si)).copy_from(&b);
            }
        }
        m
    }

    #[test]
    fn two_by_two_hand_examples() {
        let a = scalar_bc(&[3.0, 1.0]);
        assert_eq!(a.bc_apply(&[1.0, 0.0]).unwrap(), vec![3.0, 1.0]);
        let id = scalar_bc(&[1.0, 0.0]);
        assert_eq!(id.bc_apply(&[2.5, -1.0]).unwrap(), vec![2.5, -1.0]);

        let sb = block_diagonalize(&a);
        assert!((sb.block(0)[(0, 0)] - Complex64::new(4.0, 0.0)).norm() < 1e-14);
        assert!((sb.block(1)[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn blockwise_two_point_dft_of_identity_blocks() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let a = BlockCirculantOp::from_dense_blocks(&[&i2 * 2.0, i2.clone()]).unwrap();
        let sb = block_diagonalize(&a);
        for r in 0..2 {
            for c in 0..2 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((sb.block(0)[(r, c)] - Complex64::new(3.0 * e, 0.0)).norm() < 1e-14);
                assert!((sb.block(1)[(r, c)] - Complex64::new(e, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn apply_matches_dense_materialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_sparse_bc(&mut rng, 8, 3, 3, 0.4);
        let d = dense_from_blocks(&a);
        let x: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = a.apply(&x);
        let yd = &d * nalgebra::DVector::from_vec(x.clone());
        for (u, v) in y.iter().zip(yd.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let yt: Vec<f64> = (0..24).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xt = a.apply_adjoint(&yt);
        let xd = d.transpose() * nalgebra::DVector::from_vec(yt);
        for (u, v) in xt.iter().zip(xd.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_operator_is_block_circulant_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_sparse_bc(&mut rng, 5, 2, 3, 0.5);
        let at = a.adjoint();
        assert_eq!(to_dense(&at), to_dense(&a).transpose());
    }

    #[test]
    fn spectral_reconstruction_recovers_first_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_sparse_bc(&mut rng, 6, 3, 2, 0.6);
        let rec = block_diagonalize(&a).to_first_block_row();
        for (b, r) in a.first_block_row().iter().zip(&rec) {
            assert!((b.to_dense() - r).abs().max() < 1e-10);
        }
    }

    #[test]
    fn spectral_diagonal_matches_blocks_and_is_conjugate_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_sparse_bc(&mut rng, 7, 3, 3, 0.7);
        let diag = a.spectral_diagonal().unwrap();
        let sb = block_diagonalize(&a);
        for k in 0..7 {
            for c in 0..3 {
                assert!((diag[k * 3 + c] - sb.block(k)[(c, c)]).norm() < 1e-12);
            }
            let mirror = sb.block((7 - k) % 7);
            assert!((mirror - sb.block(k).map(|z| z.conj())).map(|z| z.norm()).max() < 1e-12);
        }
    }

    #[test]
    fn gram_sum_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_sparse_bc(&mut rng, 5, 4, 3, 0.5);
        let k = random_sparse_bc(&mut rng, 5, 2, 3, 0.5);
        let wa: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
        let wk = vec![1.0; 2];
        let g = gram_sum(&[
            GramTerm { op: &a, weights: &wa, coeff: 1.0 },
            GramTerm { op: &k, weights: &wk, coeff: 0.3 },
        ])
        .unwrap();
        let da = dense_from_blocks(&a);
        let dk = dense_from_blocks(&k);
        let wfull = nalgebra::DVector::from_fn(20, |i, _| wa[i % 4]);
        let want = da.transpose() * DMatrix::from_diagonal(&wfull) * &da + dk.transpose() * &dk * 0.3;
        assert!((dense_from_blocks(&g) - want).abs().max() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let b1 = SparseBlock::zeros(2, 2);
        let b2 = SparseBlock::zeros(2, 3);
        assert!(BlockCirculantOp::new(vec![b1, b2]).is_err());
        assert!(BlockCirculantOp::new(vec![]).is_err());
        let a = scalar_bc(&[1.0, 2.0]);
        assert!(a.bc_apply(&[1.0]).is_err());
    }
}
