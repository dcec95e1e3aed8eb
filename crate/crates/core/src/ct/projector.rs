//! Parallel-beam projector on a polar grid.
//!
//! View `v` has angle `2 pi v / n_theta`. Ray `d` of a view is the line at
//! signed offset `u_d = -r_max + (d + 0.5) * 2 r_max / n_det` from the
//! origin, perpendicular to the detector. Rotating the object by one angle
//! bin shifts both the views and the pixel blocks by one, so only view 0
//! needs to be computed: block `m` of the first block-row holds the chord
//! lengths of view-0 rays through the pixels of angle bin `m`.

use std::f64::consts::PI;

use super::PolarGrid;
use crate::circulant::{BlockCirculantOp, SparseBlock};
use crate::error::{Error, Result};

/// Entries shorter than this are dropped from the sparse blocks.
pub const CHORD_DROP: f64 = 1e-12;

/// Detector offset of ray `d`.
pub fn detector_offset(grid: &PolarGrid, n_det: usize, d: usize) -> f64 {
    -grid.r_max() + (d as f64 + 0.5) * 2.0 * grid.r_max() / n_det as f64
}

/// Exact chord lengths of the view-0 ray at offset `u` (the vertical line
/// `x = u`), as `(pixel index, length)` pairs.
///
/// The line is cut at its crossings with every radial circle and every
/// angular half-line; each piece lies in a single pixel, found from its
/// midpoint.
pub fn ray_chords(grid: &PolarGrid, u: f64) -> Vec<(usize, f64)> {
    let rm = grid.r_max();
    if u.abs() >= rm {
        return Vec::new();
    }
    let half = (rm * rm - u * u).sqrt();
    let mut cuts = vec![-half, half];
    for i in 1..grid.n_r() {
        let r = i as f64 * grid.dr();
        if r > u.abs() {
            let h = (r * r - u * u).sqrt();
            cuts.push(-h);
            cuts.push(h);
        }
    }
    for j in 0..grid.n_theta() {
        let th = j as f64 * grid.dtheta();
        let (s, c) = th.sin_cos();
        // Half-line rho * (c, s), rho > 0, meets x = u at rho = u / c.
        if c.abs() > 1e-15 {
            let rho = u / c;
            if rho > 0.0 {
                let y = rho * s;
                if y.abs() < half {
                    cuts.push(y);
                }
            } else if rho == 0.0 {
                cuts.push(0.0);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut acc: Vec<(usize, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        if let Some(p) = grid.locate(u, mid) {
            match acc.iter_mut().find(|e| e.0 == p) {
                Some(e) => e.1 += len,
                None => acc.push((p, len)),
            }
        }
    }
    acc.retain(|e| e.1 > CHORD_DROP);
    acc
}

/// Build the block-circulant projector for `n_views` views and `n_det` detectors.
pub fn make_projector(grid: &PolarGrid, n_det: usize, n_views: usize) -> Result<BlockCirculantOp> {
    if n_views != grid.n_theta() {
        return Err(Error::Config(format!(
            "view count {n_views} must equal the angular bin count {}",
            grid.n_theta()
        )));
    }
    if n_det == 0 {
        return Err(Error::Config("need at least one detector".into()));
    }
    let n_r = grid.n_r();
    let mut trip: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); grid.n_theta()];
    for d in 0..n_det {
        for (p, len) in ray_chords(grid, detector_offset(grid, n_det, d)) {
            let (i, m) = grid.bins(p);
            trip[m].push((d, i, len));
        }
    }
    let blocks = trip
        .into_iter()
        .map(|t| SparseBlock::from_triplets(n_det, n_r, t, CHORD_DROP))
        .collect();
    BlockCirculantOp::new(blocks)
}

/// Cartesian position of view `v`, ray offset `u`, at line parameter `t`.
pub fn ray_point(n_theta: usize, v: usize, u: f64, t: f64) -> (f64, f64) {
    let phi = 2.0 * PI * v as f64 / n_theta as f64;
    let (s, c) = phi.sin_cos();
    // View 0 is the line x = u; view v is that line rotated by phi.
    (u * c - t * s, u * s + t * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::LinOp;

    /// Midpoint-rule ray marching through the disc, `samples` points per pixel width.
    fn marched(grid: &PolarGrid, n_det: usize, v: usize, d: usize, x: &[f64], samples: usize) -> f64 {
        let u = detector_offset(grid, n_det, d);
        let rm = grid.r_max();
        let h = grid.dr() / samples as f64;
        let n = (2.0 * rm / h).ceil() as usize;
        let h = 2.0 * rm / n as f64;
        (0..n)
            .map(|k| {
                let t = -rm + (k as f64 + 0.5) * h;
                let (px, py) = ray_point(grid.n_theta(), v, u, t);
                grid.locate(px, py).map_or(0.0, |p| x[p] * h)
            })
            .sum()
    }

    #[test]
    fn single_pixel_disc() {
        let grid = PolarGrid::new(1, 1, 1.0).unwrap();
        let a = make_projector(&grid, 1, 1).unwrap();
        let y = a.apply(&[1.0]);
        assert!((y[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn all_ones_phantom_gives_total_chord() {
        let grid = PolarGrid::new(8, 12, 1.0).unwrap();
        let n_det = 10;
        let a = make_projector(&grid, n_det, 12).unwrap();
        let b = a.apply(&vec![1.0; grid.n_pixels()]);
        for v in 0..12 {
            for d in 0..n_det {
                let u = detector_offset(&grid, n_det, d);
                let want = 2.0 * (1.0 - u * u).sqrt();
                assert!((b[v * n_det + d] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_ray_marching_oracle() {
        let grid = PolarGrid::new(6, 10, 1.0).unwrap();
        let n_det = 9;
        let a = make_projector(&grid, n_det, 10).unwrap();
        let x: Vec<f64> = (0..grid.n_pixels()).map(|p| ((p * 37) % 11) as f64 / 10.0).collect();
        let b = a.apply(&x);
        for v in 0..10 {
            for d in 0..n_det {
                let m = marched(&grid, n_det, v, d, &x, 2000);
                assert!((b[v * n_det + d] - m).abs() < 2e-3, "view {v} det {d}: {} vs {m}", b[v * n_det + d]);
            }
        }
    }

    #[test]
    fn nonnegative_and_wrong_view_count_rejected() {
        let grid = PolarGrid::new(32, 64, 1.0).unwrap();
        let a = make_projector(&grid, 48, 64).unwrap();
        assert!(a.first_block_row().iter().all(|b| b.values().iter().all(|&v| v > 0.0)));
        assert!(make_projector(&grid, 48, 63).is_err());
    }
}
