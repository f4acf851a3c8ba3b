//! Field containers.
//!
//! Binary layout (`.fld`), all little-endian 64-bit:
//!
//! ```text
//! u64 n_side | f64 box_length | u64 components | f64 samples...
//! ```
//!
//! Samples are stored component after component, each in row-major order
//! (flat index `i2·n + i1`).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;

pub fn write_field<W: Write>(field: &SpectralField, mut w: W) -> Result<()> {
    let g = field.grid();
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    w.write_all(&g.length().to_le_bytes())?;
    w.write_all(&(field.components() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * g.len());
    for c in 0..field.components() {
        buf.clear();
        for v in field.values(c) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<SpectralField> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let length = f64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let components = u64::from_le_bytes(word) as usize;
    if !(1..=2).contains(&components) {
        return Err(Error::Format(format!("component count {components}")));
    }
    let grid = Grid2D::new(n, length).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps = Vec::with_capacity(components);
    let mut bytes = vec![0u8; 8 * grid.len()];
    for _ in 0..components {
        r.read_exact(&mut bytes)?;
        comps.push(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect(),
        );
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    SpectralField::from_values(grid, comps)
}

pub fn save_field(field: &SpectralField, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_field(field, std::io::BufWriter::new(file))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<SpectralField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

/// CSV with columns `x,y,c0[,c1]`, one row per sample.
pub fn write_field_csv<W: Write>(field: &SpectralField, mut w: W) -> Result<()> {
    let g = field.grid();
    let header = if field.is_scalar() { "x,y,c0" } else { "x,y,c0,c1" };
    writeln!(w, "{header}")?;
    for i in 0..g.len() {
        let (x, y) = g.point(i);
        write!(w, "{x:.17e},{y:.17e}")?;
        for c in 0..field.components() {
            write!(w, ",{:.17e}", field.values(c)[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_little_endian_words() {
        let g = Grid2D::new(8, 2.5).unwrap();
        let f = SpectralField::constant(g, 1.0);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 64);
        assert_eq!(&buf[0..8], &8u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2.5f64.to_le_bytes());
        assert_eq!(&buf[16..24], &1u64.to_le_bytes());
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
    }

    #[test]
    fn rejects_truncated_and_padded_payloads() {
        let g = Grid2D::new(8, 1.0).unwrap();
        let f = SpectralField::constant(g, 1.0);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert!(read_field(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(matches!(read_field(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let g = Grid2D::new(8, 1.0).unwrap();
        let f = SpectralField::vector_from_fn(g, |x, y| (x, y));
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("x,y,c0,c1\n"));
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bitwise(seed in 0u64..1000, vector in any::<bool>()) {
            let g = Grid2D::new(16, 1.0 + seed as f64 * 0.01).unwrap();
            let s = seed as f64;
            let f = if vector {
                SpectralField::vector_from_fn(g, move |x, y| ((x + s).sin(), (y * s).cos()))
            } else {
                SpectralField::from_fn(g, move |x, y| (x * y + s).sin())
            };
            let mut buf = Vec::new();
            write_field(&f, &mut buf).unwrap();
            let back = read_field(&buf[..]).unwrap();
            prop_assert_eq!(back.grid(), f.grid());
            for c in 0..f.components() {
                prop_assert_eq!(back.values(c), f.values(c));
            }
        }
    }
}
