//! Image and sinogram persistence.
//!
//! * 16-bit binary PGM (`P5`, maxval 65535, big-endian samples). Values are
//!   mapped affinely from `[min, max]` to `[0, 65535]`; the range is written
//!   to a sidecar `<name>.range` text file with 17 significant digits.
//! * `IMGF` raw blobs: magic `IMGF`, version `u32 = 1`, rows and cols as
//!   `u64`, then `rows * cols` `f64` values, all little-endian.
//!
//! A sinogram is stored with one grid row per angle.

use std::fs;
use std::path::{Path, PathBuf};

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::types::{Image, Sinogram};

const IMGF_MAGIC: &[u8; 4] = b"IMGF";
const IMGF_VERSION: u32 = 1;

/// A row-major 2-D grid of values.
pub trait Grid {
    /// `(rows, cols)` of the stored grid.
    fn grid_shape(&self) -> (usize, usize);
    fn grid_data(&self) -> &[f64];
}

impl Grid for Image {
    fn grid_shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }
    fn grid_data(&self) -> &[f64] {
        self.data()
    }
}

impl Grid for Sinogram {
    fn grid_shape(&self) -> (usize, usize) {
        (self.angles(), self.rays())
    }
    fn grid_data(&self) -> &[f64] {
        self.data()
    }
}

pub fn range_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("range")
}

pub fn write_pgm(grid: &impl Grid, path: &Path) -> Result<()> {
    let (rows, cols) = grid.grid_shape();
    let data = grid.grid_data();
    let (lo, hi) = crate::linalg::min_max(data);
    let (lo, hi) = if data.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    let mut buf = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for &v in data {
        let q = ((v - lo) * scale).round().clamp(0.0, 65535.0) as u16;
        buf.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    let sidecar = range_path(path);
    fs::write(&sidecar, format!("min = {lo:.16e}\nmax = {hi:.16e}\n"))
        .map_err(|e| Error::io(&sidecar, e))
}

/// Reads a 16-bit PGM and its range sidecar, returning `(rows, cols, values)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(Error::format(0, "expected a 16-bit P5 PGM"));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(0, format!("bad PGM dimension `{s}`")))
    };
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = &bytes[pos.min(bytes.len())..];
    if body.len() != rows * cols * 2 {
        return Err(Error::format(pos as u64, "PGM body length does not match header"));
    }
    let sidecar = range_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut lo = None;
    let mut hi = None;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::format(0, format!("bad range value `{}`", v.trim())))?;
            match k.trim() {
                "min" => lo = Some(v),
                "max" => hi = Some(v),
                _ => {}
            }
        }
    }
    let (lo, hi) = lo
        .zip(hi)
        .ok_or_else(|| Error::format(0, "range sidecar needs min and max"))?;
    let values = body
        .chunks_exact(2)
        .map(|b| lo + f64::from(u16::from_be_bytes([b[0], b[1]])) / 65535.0 * (hi - lo))
        .collect();
    Ok((rows, cols, values))
}

pub fn encode_imgf(grid: &impl Grid) -> Vec<u8> {
    let (rows, cols) = grid.grid_shape();
    let mut buf = Vec::with_capacity(24 + grid.grid_data().len() * 8);
    buf.extend_from_slice(IMGF_MAGIC);
    buf.extend_from_slice(&IMGF_VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in grid.grid_data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Parses an `IMGF` blob into `(rows, cols, values)`.
pub fn decode_imgf(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut rd = ByteReader::new(bytes);
    rd.expect_magic(IMGF_MAGIC)?;
    let version = rd.u32()?;
    if version != IMGF_VERSION {
        return Err(Error::format(4, format!("unsupported IMGF version {version}")));
    }
    let rows = rd.u64_usize()?;
    let cols = rd.u64_usize()?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(8, "IMGF dimensions overflow"))?;
    let mut values = Vec::with_capacity(count.min(bytes.len() / 8));
    for _ in 0..count {
        values.push(rd.f64()?);
    }
    rd.expect_end()?;
    Ok((rows, cols, values))
}

pub fn write_imgf(grid: &impl Grid, path: &Path) -> Result<()> {
    fs::write(path, encode_imgf(grid)).map_err(|e| Error::io(path, e))
}

pub fn read_imgf(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    decode_imgf(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_image(path: &Path) -> Result<Image> {
    let (rows, cols, values) = read_imgf(path)?;
    Image::from_vec(rows, cols, values)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let (angles, rays, values) = read_imgf(path)?;
    Sinogram::from_vec(rays, angles, values)
}
