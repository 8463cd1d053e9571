//! Flat binary operator file.
//!
//! Layout (little-endian, no padding): magic `SPRT`, version `u32 = 1`,
//! `rows`, `cols`, `nnz` as `u64`, then `rows + 1` row offsets (`u64`),
//! `nnz` column indices (`u32`) and `nnz` values (`f64`).
//! Geometry metadata is not stored.

use std::io::{Read, Write};
use std::path::Path;

use super::SparseOperator;
use crate::binio::ByteReader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPRT";
const VERSION: u32 = 1;

pub fn write_sprt<W: Write>(op: &SparseOperator, mut w: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(28 + op.row_offsets().len() * 8 + op.nnz() * 12);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for v in [op.rows(), op.cols(), op.nnz()] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &o in op.row_offsets() {
        buf.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &c in op.col_indices() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for &v in op.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_sprt<R: Read>(mut r: R) -> Result<SparseOperator> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::format(0, format!("read failed: {e}")))?;
    let mut rd = ByteReader::new(&bytes);
    rd.expect_magic(MAGIC)?;
    let version = rd.u32()?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let rows = rd.u64_usize()?;
    let cols = rd.u64_usize()?;
    let nnz = rd.u64_usize()?;
    let mut row_offsets = Vec::with_capacity(rows.min(bytes.len() / 8) + 1);
    for _ in 0..=rows {
        row_offsets.push(rd.u64_usize()?);
    }
    let mut col_indices = Vec::with_capacity(nnz.min(bytes.len() / 4));
    for _ in 0..nnz {
        col_indices.push(rd.u32()?);
    }
    let mut values = Vec::with_capacity(nnz.min(bytes.len() / 8));
    for _ in 0..nnz {
        values.push(rd.f64()?);
    }
    rd.expect_end()?;
    SparseOperator::from_csr(rows, cols, row_offsets, col_indices, values)
        .map_err(|e| Error::format(rd.offset(), e.to_string()))
}

pub fn write_sprt_file(op: &SparseOperator, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sprt(op, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn read_sprt_file(path: &Path) -> Result<SparseOperator> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sprt(f)
}
