//! Finite-difference operator on the polar grid.
//!
//! For each angle bin `j` the output block holds `n_r - 1` radial
//! differences `x[i+1, j] - x[i, j]` followed by `n_r` angular differences
//! `x[i, j+1] - x[i, j]` (periodic in angle). The operator is therefore
//! block-circulant with the same block index as the image.

use super::PolarGrid;
use crate::circulant::{BlockCirculantOp, SparseBlock};
use crate::error::Result;

/// Rows per output block: `2 n_r - 1`.
pub fn difference_rows(grid: &PolarGrid) -> usize {
    2 * grid.n_r() - 1
}

pub fn make_difference_operator(grid: &PolarGrid) -> Result<BlockCirculantOp> {
    let (n_r, n_b) = (grid.n_r(), grid.n_theta());
    let s_out = difference_rows(grid);
    let mut own = Vec::new();
    let mut next = Vec::new();
    for i in 0..n_r - 1 {
        own.push((i, i, -1.0));
        own.push((i, i + 1, 1.0));
    }
    for i in 0..n_r {
        let row = n_r - 1 + i;
        own.push((row, i, -1.0));
        next.push((row, i, 1.0));
    }
    let mut blocks = vec![SparseBlock::zeros(s_out, n_r); n_b];
    if n_b == 1 {
        // The angular neighbour is the pixel itself.
        own.extend(next);
        blocks[0] = SparseBlock::from_triplets(s_out, n_r, own, 0.0);
    } else {
        blocks[0] = SparseBlock::from_triplets(s_out, n_r, own, 0.0);
        blocks[1] = SparseBlock::from_triplets(s_out, n_r, next, 0.0);
    }
    BlockCirculantOp::new(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::LinOp;

    #[test]
    fn stencil_on_small_grid() {
        let grid = PolarGrid::new(3, 4, 1.0).unwrap();
        let k = make_difference_operator(&grid).unwrap();
        assert_eq!((k.nrows(), k.ncols()), (20, 12));
        let x: Vec<f64> = (0..12).map(|p| (p * p) as f64).collect();
        let q = k.apply(&x);
        for j in 0..4 {
            for i in 0..2 {
                let want = x[grid.index(i + 1, j)] - x[grid.index(i, j)];
                assert_eq!(q[j * 5 + i], want);
            }
            for i in 0..3 {
                let want = x[grid.index(i, (j + 1) % 4)] - x[grid.index(i, j)];
                assert_eq!(q[j * 5 + 2 + i], want);
            }
        }
    }

    #[test]
    fn constants_are_in_the_null_space() {
        for n_theta in [1, 2, 5] {
            let grid = PolarGrid::new(4, n_theta, 1.0).unwrap();
            let k = make_difference_operator(&grid).unwrap();
            assert!(k.apply(&vec![2.5; grid.n_pixels()]).iter().all(|&v| v == 0.0));
        }
    }
}
