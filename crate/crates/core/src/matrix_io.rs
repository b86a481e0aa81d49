//! Matrix export: CSV with issuer header, and a compact binary form.
//!
//! Binary layout: magic `MRK1`, `rows: u64`, `cols: u64`, then
//! `rows × cols` little-endian `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MRK1";

pub fn write_csv<W: Write>(out: W, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::InvalidInput(
            "header length differs from column count".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(header).map_err(ser)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format_f64(*x)))
            .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Shortest representation that round-trips.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::Serde(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Serde(e.to_string()))?;
        for field in rec.iter() {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Serde(format!("`{field}`: {e}")))?,
            );
        }
        rows += 1;
    }
    Ok((
        header.clone(),
        DMatrix::from_row_slice(rows, header.len(), &data),
    ))
}

pub fn encode(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for row in m.row_iter() {
        for x in row.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let bad = |m: &str| Error::InvalidInput(format!("binary matrix: {m}"));
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(bad("missing MRK1 header"));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(20))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn save_binary(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, encode(m)).map_err(|e| Error::io(path, e))
}

pub fn load_binary(path: &Path) -> Result<DMatrix<f64>> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
