//! Flat binary layout for bi-radial fields.
//!
//! Header, all little-endian 64-bit: `N`, `k`, side (`0` space, `1`
//! frequency), row count, column count as unsigned integers, then `T` and
//! `Ξ` as floats. The body is the row-major list of `(re, im)` pairs.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::resolvent::{BiRadialField, BiRadialGrid, Side};

/// Metadata stored ahead of the values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldHeader {
    pub n: usize,
    pub k: usize,
    pub side: Side,
    pub rows: usize,
    pub cols: usize,
    pub t_max: f64,
    pub xi_max: f64,
}

impl FieldHeader {
    pub fn of(field: &BiRadialField) -> Self {
        let grid = field.grid();
        let (rows, cols) = field.shape();
        Self {
            n: grid.dim().n(),
            k: grid.dim().k(),
            side: field.side(),
            rows,
            cols,
            t_max: grid.t_max(),
            xi_max: grid.xi_max(),
        }
    }
}

fn side_code(side: Side) -> u64 {
    match side {
        Side::Space => 0,
        Side::Frequency => 1,
    }
}

pub fn write_field(field: &BiRadialField, mut out: impl Write) -> Result<()> {
    let h = FieldHeader::of(field);
    for word in [h.n as u64, h.k as u64, side_code(h.side), h.rows as u64, h.cols as u64] {
        out.write_all(&word.to_le_bytes())?;
    }
    out.write_all(&h.t_max.to_le_bytes())?;
    out.write_all(&h.xi_max.to_le_bytes())?;
    let mut body = Vec::with_capacity(16 * field.values().len());
    for z in field.values() {
        body.extend_from_slice(&z.re.to_le_bytes());
        body.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&body)?;
    Ok(())
}

fn word(input: &mut impl Read) -> Result<[u8; 8]> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

fn count(input: &mut impl Read) -> Result<usize> {
    usize::try_from(u64::from_le_bytes(word(input)?)).map_err(|_| Error::Format("count overflows usize".into()))
}

pub fn read_field(mut input: impl Read) -> Result<(FieldHeader, Vec<Complex64>)> {
    let n = count(&mut input)?;
    let k = count(&mut input)?;
    let side = match count(&mut input)? {
        0 => Side::Space,
        1 => Side::Frequency,
        other => return Err(Error::Format(format!("unknown side code {other}"))),
    };
    let rows = count(&mut input)?;
    let cols = count(&mut input)?;
    let t_max = f64::from_le_bytes(word(&mut input)?);
    let xi_max = f64::from_le_bytes(word(&mut input)?);
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("node count overflows".into()))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 16 * len {
        return Err(Error::Format(format!(
            "expected {} value bytes, found {}",
            16 * len,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    let header = FieldHeader {
        n,
        k,
        side,
        rows,
        cols,
        t_max,
        xi_max,
    };
    Ok((header, values))
}

/// Rebuilds a field on `grid`, which must match the stored header.
pub fn field_on_grid(grid: Arc<BiRadialGrid>, header: &FieldHeader, values: Vec<Complex64>) -> Result<BiRadialField> {
    let dim = grid.dim();
    let matches = dim.n() == header.n
        && dim.k() == header.k
        && grid.shape(header.side) == (header.rows, header.cols)
        && grid.t_max() == header.t_max
        && grid.xi_max() == header.xi_max;
    if !matches {
        return Err(Error::Format("stored header does not match the grid".into()));
    }
    BiRadialField::new(grid, header.side, values)
}
