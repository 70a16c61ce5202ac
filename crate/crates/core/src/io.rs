//! Field serialization.
//!
//! Binary layout (little-endian): `u64 n`, `u64 N`, `f64 L`, then `N^n`
//! values as `f64` in row-major order. The CSV form has one row per lattice
//! point: index tuple, coordinate tuple, value.

use std::io::{Read, Write};

use crate::grid::{Field, GridSpec};
use crate::{Error, Real, Result};

pub fn write_field_binary<T: Real, W: Write>(field: &Field<T>, mut out: W) -> Result<()> {
    let g = field.grid();
    out.write_all(&(g.dim() as u64).to_le_bytes())?;
    out.write_all(&(g.points() as u64).to_le_bytes())?;
    out.write_all(&g.length().to_f64_lossy().to_le_bytes())?;
    for &v in field.values() {
        out.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_word<R: Read>(input: &mut R) -> Result<[u8; 8]> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated field container".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_field_binary<T: Real, R: Read>(mut input: R) -> Result<Field<T>> {
    let dim = u64::from_le_bytes(read_word(&mut input)?);
    let points = u64::from_le_bytes(read_word(&mut input)?);
    let length = f64::from_le_bytes(read_word(&mut input)?);
    if !(1..=3).contains(&dim) || points > (1 << 16) {
        return Err(Error::Format(format!("implausible header n = {dim}, N = {points}")));
    }
    let grid = GridSpec::new(dim as usize, points as usize, T::of(length))
        .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(T::of(f64::from_le_bytes(read_word(&mut input)?)));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after field values".into()));
    }
    Field::from_values(grid, values)
}

pub fn write_field_csv<T: Real, W: Write>(field: &Field<T>, mut out: W) -> Result<()> {
    let g = field.grid();
    let axes = ["i", "j", "k"];
    let coords = ["x", "y", "z"];
    let header: Vec<&str> = axes[..g.dim()].iter().chain(&coords[..g.dim()]).copied().chain(["value"]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (flat, &v) in field.values().iter().enumerate() {
        let idx = g.unravel(flat);
        let mut row: Vec<String> = idx[..g.dim()].iter().map(|j| j.to_string()).collect();
        row.extend(idx[..g.dim()].iter().map(|&j| format!("{:e}", g.coord(j))));
        row.push(format!("{v:e}"));
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}
