//! Sample value import/export.
//!
//! CSV: header `point_id,rep_0,...,rep_{R-1}`, one row per point; floats
//! are printed in Rust's shortest round-trip form so read-back is
//! bit-exact.
//!
//! `MKC1` binary: magic bytes `MKC1`, then two little-endian u64 sizes
//! (replicates, points), then the replicate-major f64 value matrix in
//! little-endian row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{FieldError, FieldSample};
use crate::atlas::atomic_write;

pub const MKC1_MAGIC: &[u8; 4] = b"MKC1";

/// Write the value matrix in the `MKC1` format.
pub fn write_values_mkc1(sample: &FieldSample, path: &Path) -> Result<(), FieldError> {
    let mut bytes =
        Vec::with_capacity(4 + 16 + sample.values().len() * std::mem::size_of::<f64>());
    bytes.extend_from_slice(MKC1_MAGIC);
    bytes.extend_from_slice(&(sample.replicates() as u64).to_le_bytes());
    bytes.extend_from_slice(&(sample.len() as u64).to_le_bytes());
    for v in sample.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes).map_err(|e| FieldError::Format(e.to_string()))
}

/// Read an `MKC1` file back as `(replicates, points, values)`.
pub fn read_values_mkc1(path: &Path) -> Result<(usize, usize, Vec<f64>), FieldError> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| FieldError::Format(format!("{}: {e}", path.display())))?;
    let mut header = [0u8; 20];
    file.read_exact(&mut header).map_err(|e| FieldError::Format(e.to_string()))?;
    if &header[0..4] != MKC1_MAGIC {
        return Err(FieldError::Format("bad magic bytes, not an MKC1 file".into()));
    }
    let replicates = u64::from_le_bytes(header[4..12].try_into().unwrap()) as usize;
    let points = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let expected = replicates
        .checked_mul(points)
        .ok_or_else(|| FieldError::Format("dimension overflow".into()))?;
    let mut rest = Vec::new();
    file.read_to_end(&mut rest).map_err(|e| FieldError::Format(e.to_string()))?;
    if rest.len() != expected * 8 {
        return Err(FieldError::Format(format!(
            "expected {} value bytes, found {}",
            expected * 8,
            rest.len()
        )));
    }
    let values = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((replicates, points, values))
}

/// Write the value matrix as CSV, one row per point.
pub fn write_sample_csv(sample: &FieldSample, path: &Path) -> Result<(), FieldError> {
    let mut out = Vec::new();
    let mut header = String::from("point_id");
    for r in 0..sample.replicates() {
        header.push_str(&format!(",rep_{r}"));
    }
    writeln!(out, "{header}").map_err(|e| FieldError::Format(e.to_string()))?;
    for i in 0..sample.len() {
        let mut line = i.to_string();
        for rep in 0..sample.replicates() {
            line.push_str(&format!(",{}", sample.value(rep, i)));
        }
        writeln!(out, "{line}").map_err(|e| FieldError::Format(e.to_string()))?;
    }
    atomic_write(path, &out).map_err(|e| FieldError::Format(e.to_string()))
}

/// Read a sample CSV back as `(replicates, points, values)` with the
/// replicate-major layout.
pub fn read_sample_csv(path: &Path) -> Result<(usize, usize, Vec<f64>), FieldError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FieldError::Format(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| FieldError::Format("empty file".into()))?;
    let replicates = header.split(',').count().saturating_sub(1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let _id = cells.next();
        let row: Vec<f64> = cells
            .map(|c| {
                c.parse::<f64>().map_err(|e| {
                    FieldError::Format(format!("line {}: bad float {c:?}: {e}", lineno + 2))
                })
            })
            .collect::<Result<_, _>>()?;
        if row.len() != replicates {
            return Err(FieldError::Format(format!(
                "line {}: {} values, expected {replicates}",
                lineno + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    let points = rows.len();
    let mut values = vec![0.0; replicates * points];
    for (i, row) in rows.iter().enumerate() {
        for (rep, v) in row.iter().enumerate() {
            values[rep * points + i] = *v;
        }
    }
    Ok((replicates, points, values))
}
