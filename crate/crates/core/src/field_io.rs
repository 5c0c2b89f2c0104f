//! Field serialization: a little-endian binary container and CSV for
//! small grids.
//!
//! Binary layout: magic `SHF1`, then `d: u8`, `role: u8`, `N: u32`,
//! `M: u32`, `L: f64`, `T: f64`, then `(M+1) * N^d` row-major f64 values.

use std::io::{self, Read, Write};

use crate::grid::{FieldRole, GridSpec, SpaceTimeField};

const MAGIC: &[u8; 4] = b"SHF1";

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes; not a field container")]
    BadMagic,
    #[error("unknown role tag {0}")]
    BadRole(u8),
    #[error("header is inconsistent: {0}")]
    BadHeader(#[from] crate::grid::GridError),
}

pub fn write_field<W: Write>(mut w: W, field: &SpaceTimeField) -> Result<(), FieldIoError> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&[g.dim(), field.role().tag()])?;
    w.write_all(&(g.points_per_dim() as u32).to_le_bytes())?;
    w.write_all(&(g.steps() as u32).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&g.horizon().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SpaceTimeField, FieldIoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FieldIoError::BadMagic);
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    let role = FieldRole::from_tag(head[1]).ok_or(FieldIoError::BadRole(head[1]))?;
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let points = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let steps = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let half_width = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)?;
    let horizon = f64::from_le_bytes(f64buf);
    let grid = GridSpec::new(head[0], half_width, points, horizon, steps)?;
    let len = (steps + 1) * grid.node_count();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut f64buf)?;
        values.push(f64::from_le_bytes(f64buf));
    }
    Ok(SpaceTimeField::from_values(grid, role, values)?)
}

/// CSV dump `t,x,(y,)value` — intended for small grids only.
pub fn write_field_csv<W: Write>(mut w: W, field: &SpaceTimeField) -> Result<(), FieldIoError> {
    let g = field.grid();
    if g.dim() == 1 {
        writeln!(w, "t,x,value")?;
    } else {
        writeln!(w, "t,x,y,value")?;
    }
    for k in 0..=g.steps() {
        let t = g.time_value(k);
        let slice = field.slice(k);
        for node in 0..g.node_count() {
            let c = g.node_coord(node);
            if g.dim() == 1 {
                writeln!(w, "{t},{},{}", c[0], slice[node])?;
            } else {
                writeln!(w, "{t},{},{},{}", c[0], c[1], slice[node])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = GridSpec::new(1, 4.0, 16, 0.5, 3).unwrap();
        let f = SpaceTimeField::from_fn(g, FieldRole::StochConv, |t, x| t + 0.1 * x[0]);
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_field(&b"nope"[..]), Err(FieldIoError::BadMagic) | Err(FieldIoError::Io(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = GridSpec::new(1, 4.0, 8, 0.5, 1).unwrap();
        let f = SpaceTimeField::zero(g, FieldRole::Generic);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,value"));
        assert_eq!(lines.count(), 2 * 8);
    }

    #[test]
    fn csv_two_dimensional_layout() {
        let g = GridSpec::new(2, 4.0, 8, 0.5, 1).unwrap();
        let f = SpaceTimeField::from_fn(g, FieldRole::Generic, |_, x| x[0] + 10.0 * x[1]);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,y,value"));
        assert_eq!(lines.count(), 2 * 64);
        // Round trip through the binary container too.
        let mut bin = Vec::new();
        write_field(&mut bin, &f).unwrap();
        assert_eq!(read_field(bin.as_slice()).unwrap(), f);
    }
}
