//! Image and sinogram writers.

use std::io::Write;
use std::path::Path;

use super::PolarGrid;
use crate::error::{check_len, Error, Result};

/// Nearest-neighbour resampling of a polar image onto a `size x size`
/// raster covering `[-r_max, r_max]^2`, row 0 at the top. Points outside
/// the disc are zero.
pub fn polar_to_cartesian(grid: &PolarGrid, image: &[f64], size: usize) -> Result<Vec<f64>> {
    check_len("polar_to_cartesian", grid.n_pixels(), image.len())?;
    let rm = grid.r_max();
    let h = 2.0 * rm / size as f64;
    let mut out = vec![0.0; size * size];
    for row in 0..size {
        let y = rm - (row as f64 + 0.5) * h;
        for col in 0..size {
            let x = -rm + (col as f64 + 0.5) * h;
            if let Some(p) = grid.locate(x, y) {
                out[row * size + col] = image[p];
            }
        }
    }
    Ok(out)
}

/// Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples). Values are
/// mapped linearly from `[0, max(1, max value)]` and clamped.
pub fn write_pgm(mut w: impl Write, raster: &[f64], width: usize, height: usize) -> Result<()> {
    check_len("write_pgm", width * height, raster.len())?;
    let top = raster.iter().cloned().fold(1.0f64, f64::max);
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let mut buf = Vec::with_capacity(2 * raster.len());
    for &v in raster {
        let q = (v / top).clamp(0.0, 1.0) * 65535.0;
        buf.extend_from_slice(&(q.round() as u16).to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_image_pgm(grid: &PolarGrid, image: &[f64], size: usize, path: impl AsRef<Path>) -> Result<()> {
    let raster = polar_to_cartesian(grid, image, size)?;
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_pgm(&mut w, &raster, size, size)?;
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Polar image as CSV rows `r,theta,value` (bin indices).
pub fn write_image_csv(w: impl Write, grid: &PolarGrid, image: &[f64]) -> Result<()> {
    check_len("write_image_csv", grid.n_pixels(), image.len())?;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["r", "theta", "value"]).map_err(csv_err)?;
    for (p, v) in image.iter().enumerate() {
        let (i, j) = grid.bins(p);
        wr.write_record([i.to_string(), j.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Sinogram as CSV rows `view,detector,value`.
pub fn write_sinogram_csv(w: impl Write, n_det: usize, data: &[f64]) -> Result<()> {
    if n_det == 0 || !data.len().is_multiple_of(n_det) {
        return Err(Error::Config("sinogram length is not a multiple of the detector count".into()));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["view", "detector", "value"]).map_err(csv_err)?;
    for (k, v) in data.iter().enumerate() {
        wr.write_record([(k / n_det).to_string(), (k % n_det).to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
