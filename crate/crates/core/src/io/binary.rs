//! Checksummed little-endian matrix files.
//!
//! Layout: magic `ROICT1\0`, `u32` rows, `u32` cols, `u32` dtype tag
//! (1 = f64), `u64` payload length in bytes, payload, `u32` CRC32 of the
//! payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Image;
use crate::tomo::Sinogram;

pub const MAGIC: &[u8; 7] = b"ROICT1\0";
pub const DTYPE_F64: u32 = 1;
const HEADER_LEN: usize = 7 + 4 + 4 + 4 + 8;

pub fn encode_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<Vec<u8>> {
    if rows * cols != data.len() {
        return Err(Error::Shape(format!("{rows}x{cols} matrix with {} values", data.len())));
    }
    let rows32 = u32::try_from(rows).map_err(|_| Error::Shape("too many rows".into()))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::Shape("too many columns".into()))?;
    let mut payload = Vec::with_capacity(data.len() * 8);
    for v in data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < HEADER_LEN + 4 || &bytes[..7] != MAGIC {
        return Err(Error::Format("not a ROICT1 file".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let rows = u32_at(7) as usize;
    let cols = u32_at(11) as usize;
    let dtype = u32_at(15);
    if dtype != DTYPE_F64 {
        return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
    }
    let len = u64::from_le_bytes(bytes[19..27].try_into().expect("8 bytes")) as usize;
    if len != rows * cols * 8 || bytes.len() != HEADER_LEN + len + 4 {
        return Err(Error::Format("payload length does not match header".into()));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + len];
    let crc = u32_at(HEADER_LEN + len);
    if crc != crc32fast::hash(payload) {
        return Err(Error::Format("checksum mismatch".into()));
    }
    let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((rows, cols, data))
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    fs::write(path, encode_matrix(rows, cols, data)?)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    decode_matrix(&fs::read(path)?)
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    write_matrix(path, img.width(), img.width(), img.as_slice())
}

pub fn read_image(path: &Path) -> Result<Image> {
    let (rows, cols, data) = read_matrix(path)?;
    if rows != cols {
        return Err(Error::Shape(format!("image file {} is {rows}x{cols}, expected square", path.display())));
    }
    Image::from_vec(rows, data)
}

/// Rows are angles, columns detector bins.
pub fn write_sinogram(path: &Path, s: &Sinogram) -> Result<()> {
    write_matrix(path, s.n_angles(), s.n_bins(), s.as_slice())
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let (rows, cols, data) = read_matrix(path)?;
    Sinogram::from_vec(rows, cols, data)
}
