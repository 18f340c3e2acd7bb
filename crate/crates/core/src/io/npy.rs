//! Minimal NPY (version 1.0) reader/writer for 2-D little-endian `f64`
//! arrays. Kernels are stored in this portable container so they can be
//! inspected with numpy directly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

pub fn write_2d(path: impl AsRef<Path>, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::shape(format!(
            "npy write: {} values for shape ({rows}, {cols})",
            data.len()
        )));
    }
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}"
    );
    // Total of magic(6) + version(2) + header_len(2) + header must be a
    // multiple of 64, header newline-terminated.
    let unpadded = 6 + 2 + 2 + header.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    header.push_str(&" ".repeat(pad));
    header.push('\n');

    let mut f = File::create(path.as_ref())?;
    f.write_all(MAGIC)?;
    f.write_all(&[0x01, 0x00])?;
    f.write_all(&(header.len() as u16).to_le_bytes())?;
    f.write_all(header.as_bytes())?;
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_2d(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let mut f = File::open(path.as_ref())?;
    let mut magic = [0u8; 6];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not an npy file"));
    }
    let mut ver = [0u8; 2];
    f.read_exact(&mut ver)?;
    if ver[0] != 1 {
        return Err(Error::invalid(format!("unsupported npy version {}", ver[0])));
    }
    let mut len = [0u8; 2];
    f.read_exact(&mut len)?;
    let hlen = u16::from_le_bytes(len) as usize;
    let mut header = vec![0u8; hlen];
    f.read_exact(&mut header)?;
    let header = String::from_utf8_lossy(&header);
    if !header.contains("'<f8'") {
        return Err(Error::invalid("npy: expected little-endian f64 data"));
    }
    if header.contains("'fortran_order': True") {
        return Err(Error::invalid("npy: fortran order unsupported"));
    }
    let shape = parse_shape(&header)?;
    if shape.len() != 2 {
        return Err(Error::shape(format!("npy: expected 2-D shape, got {shape:?}")));
    }
    let (rows, cols) = (shape[0], shape[1]);
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::shape("npy: payload size does not match shape"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

fn parse_shape(header: &str) -> Result<Vec<usize>> {
    let start = header
        .find("'shape':")
        .ok_or_else(|| Error::invalid("npy: no shape in header"))?;
    let rest = &header[start..];
    let open = rest.find('(').ok_or_else(|| Error::invalid("npy: bad shape"))?;
    let close = rest.find(')').ok_or_else(|| Error::invalid("npy: bad shape"))?;
    rest[open + 1..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::invalid(format!("npy: bad dim {s:?}")))
        })
        .collect()
}
