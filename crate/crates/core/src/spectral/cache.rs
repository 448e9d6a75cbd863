//! Binary operator cache (`HGOP`), little-endian.
//!
//! Layout: magic, version u32, n u32, k u32, key [u8; 32]; stiffness as CSR
//! (row offsets u64 × (n+1), nnz implied by the last offset, columns u32,
//! values f64); mass f64 × n; eigenvalues f64 × k; eigenvectors f64
//! column-major n × k; gradient as CSR with interleaved re/im f64 values.

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::sparse::CsrMatrix;
use super::SpectralOperators;
use crate::io_util::{read_file, write_atomic, BinReader, BinWriter};
use crate::mesh::Mesh;
use crate::Result;

pub const MAGIC: &[u8; 4] = b"HGOP";
pub const VERSION: u32 = 1;

/// Content hash of vertices, faces and the eigenbasis size.
pub fn operator_cache_key(mesh: &Mesh, k: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(mesh.content_hash());
    h.update((k as u64).to_le_bytes());
    h.finalize().into()
}

fn write_csr<T: Copy + Default + std::ops::AddAssign + Send + Sync>(w: &mut BinWriter, m: &CsrMatrix<T>, mut value: impl FnMut(&mut BinWriter, T)) {
    for &p in m.row_ptr() {
        w.u64(p as u64);
    }
    for &c in m.col_idx() {
        w.u32(c);
    }
    for &v in m.values() {
        value(w, v);
    }
}

fn read_csr<T>(
    r: &mut BinReader,
    n: usize,
    mut value: impl FnMut(&mut BinReader) -> Result<T>,
) -> Result<CsrMatrix<T>>
where
    T: Copy + Default + std::ops::AddAssign + Send + Sync,
{
    let mut row_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_ptr.push(r.u64()? as usize);
    }
    let nnz = *row_ptr.last().unwrap_or(&0);
    if nnz > r.remaining() / 4 {
        return Err(r.error(format!("implausible nonzero count {nnz}")));
    }
    let mut cols = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        cols.push(r.u32()?);
    }
    let mut vals = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        vals.push(value(r)?);
    }
    CsrMatrix::from_raw(n, n, row_ptr, cols, vals).map_err(|e| r.error(e.to_string()))
}

pub fn encode_cache(ops: &SpectralOperators) -> Vec<u8> {
    let (n, k) = (ops.n(), ops.k());
    let mut w = BinWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u32(n as u32);
    w.u32(k as u32);
    w.bytes(&ops.key);
    write_csr(&mut w, &ops.stiffness, |w, v| w.f64(v));
    w.f64s(&ops.mass);
    w.f64s(&ops.eigenvalues);
    for j in 0..k {
        for i in 0..n {
            w.f64(ops.eigenvectors[[i, j]]);
        }
    }
    write_csr(&mut w, &ops.gradient, |w, v| {
        w.f64(v.re);
        w.f64(v.im);
    });
    w.buf
}

pub fn decode_cache(data: &[u8], path: &Path) -> Result<SpectralOperators> {
    let mut r = BinReader::new(data, path);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.error(format!("unsupported operator cache version {version}")));
    }
    let n = r.u32()? as usize;
    let k = r.u32()? as usize;
    if k > n {
        return Err(r.error(format!("k = {k} exceeds n = {n}")));
    }
    let key = r.hash()?;
    let stiffness = read_csr(&mut r, n, |r| r.f64())?;
    let mass = r.f64s(n)?;
    let eigenvalues = r.f64s(k)?;
    let flat = r.f64s(n * k)?;
    let eigenvectors = Array2::from_shape_fn((n, k), |(i, j)| flat[j * n + i]);
    let gradient = read_csr(&mut r, n, |r| Ok(Complex64::new(r.f64()?, r.f64()?)))?;
    r.finish()?;
    SpectralOperators::from_parts(key, stiffness, mass, eigenvalues, eigenvectors, gradient)
        .map_err(|e| r.error(e.to_string()))
}

pub fn write_cache(path: &Path, ops: &SpectralOperators) -> Result<()> {
    write_atomic(path, &encode_cache(ops))
}

pub fn read_cache(path: &Path) -> Result<SpectralOperators> {
    let data = read_file(path)?;
    decode_cache(&data, path)
}
