//! Binary container for block-circulant operators.
//!
//! Layout (little-endian): magic `BCOP`, `u64` n_b, s_in, s_out, then for
//! every block `u64` nnz, `u64` col_ptr[s_in + 1], `u64` row_idx[nnz],
//! `f64` values[nnz].

use std::io::{Read, Write};
use std::path::Path;

use super::{BlockCirculantOp, SparseBlock};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BCOP";

fn put_u64(w: &mut impl Write, v: usize) -> Result<()> {
    w.write_all(&(v as u64).to_le_bytes())?;
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format("size overflows usize".into()))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn write_bcop(op: &BlockCirculantOp, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u64(&mut w, op.n_b())?;
    put_u64(&mut w, op.s_in())?;
    put_u64(&mut w, op.s_out())?;
    for b in op.first_block_row() {
        put_u64(&mut w, b.nnz())?;
        for &p in b.col_ptr() {
            put_u64(&mut w, p)?;
        }
        for &r in b.row_idx() {
            put_u64(&mut w, r)?;
        }
        for &v in b.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_bcop(mut r: impl Read) -> Result<BlockCirculantOp> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, expected BCOP".into()));
    }
    let n_b = get_u64(&mut r)?;
    let s_in = get_u64(&mut r)?;
    let s_out = get_u64(&mut r)?;
    if n_b == 0 || s_in == 0 || s_out == 0 {
        return Err(Error::Format("zero dimension in header".into()));
    }
    let mut blocks = Vec::with_capacity(n_b.min(1 << 16));
    for _ in 0..n_b {
        let nnz = get_u64(&mut r)?;
        let col_ptr = (0..=s_in).map(|_| get_u64(&mut r)).collect::<Result<Vec<_>>>()?;
        let row_idx = (0..nnz).map(|_| get_u64(&mut r)).collect::<Result<Vec<_>>>()?;
        let values = (0..nnz).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        blocks.push(SparseBlock::from_csc(s_out, s_in, col_ptr, row_idx, values)?);
    }
    BlockCirculantOp::new(blocks)
}

pub fn save_bcop(op: &BlockCirculantOp, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_bcop(op, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_bcop(path: impl AsRef<Path>) -> Result<BlockCirculantOp> {
    let f = std::fs::File::open(path)?;
    read_bcop(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn roundtrip_preserves_operator() {
        let blocks = vec![
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -3.5, 0.0]),
            DMatrix::zeros(2, 3),
            DMatrix::from_row_slice(2, 3, &[0.0, 0.25, 0.0, 1e-3, 0.0, 7.0]),
        ];
        let op = BlockCirculantOp::from_dense_blocks(&blocks).unwrap();
        let mut buf = Vec::new();
        write_bcop(&op, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"BCOP");
        let back = read_bcop(buf.as_slice()).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(read_bcop(&b"XXXX"[..]), Err(Error::Format(_))));
        let op = BlockCirculantOp::from_dense_blocks(&[DMatrix::from_element(1, 1, 2.0)]).unwrap();
        let mut buf = Vec::new();
        write_bcop(&op, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_bcop(buf.as_slice()).is_err());
    }
}
