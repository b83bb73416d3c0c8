//! Binary snapshots of one spectral component.
//!
//! Layout (little endian): `b"WKGS"`, `u32` version = 1, `u32` n per axis,
//! `f64` box length, `f64` time, then `n³` complex values as `(re, im)` f64
//! pairs in FFT index order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{FieldTag, FourierGrid, SpectralField, C64};

pub const MAGIC: &[u8; 4] = b"WKGS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8;

pub fn encode(field: &SpectralField, t: f64) -> Vec<u8> {
    let g = field.grid;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.box_length().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for v in &field.values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Decodes a snapshot; the tag is not stored and must be supplied.
pub fn decode(bytes: &[u8], tag: FieldTag) -> Result<(SpectralField, f64)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a WKGS snapshot".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let n = u32_at(bytes, 8) as usize;
    let grid = FourierGrid::new(n, f64_at(bytes, 12)).map_err(|e| Error::Format(e.to_string()))?;
    let t = f64_at(bytes, 20);
    let body = &bytes[HEADER_LEN..];
    if body.len() != 16 * grid.len() {
        return Err(Error::Format(format!(
            "snapshot body has {} bytes, expected {}",
            body.len(),
            16 * grid.len()
        )));
    }
    let values = body.chunks_exact(16).map(|c| C64::new(f64_at(c, 0), f64_at(c, 8))).collect();
    Ok((SpectralField { grid, values, tag }, t))
}

pub fn write(path: &Path, field: &SpectralField, t: f64) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(field, t))?;
    Ok(())
}

pub fn read(path: &Path, tag: FieldTag) -> Result<(SpectralField, f64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn header_layout() {
        let g = make_grid(8, 2.5).unwrap();
        let f = SpectralField::zeros(g, FieldTag::Kg);
        let b = encode(&f, 3.0);
        assert_eq!(&b[..4], b"WKGS");
        assert_eq!(u32_at(&b, 4), 1);
        assert_eq!(u32_at(&b, 8), 8);
        assert_eq!(f64_at(&b, 12), 2.5);
        assert_eq!(f64_at(&b, 20), 3.0);
        assert_eq!(b.len(), 28 + 16 * 512);
    }

    #[test]
    fn file_round_trip_is_bitwise() {
        let g = make_grid(8, 4.0).unwrap();
        let f = SpectralField::from_fn(g, FieldTag::Wa, |x| C64::new(x[0].sin(), x[1] * x[2]));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wa.wkgs");
        write(&p, &f, 1.25).unwrap();
        let (h, t) = read(&p, FieldTag::Wa).unwrap();
        assert_eq!(t, 1.25);
        assert_eq!(h.grid, f.grid);
        assert!(h.values.iter().zip(&f.values).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let g = make_grid(8, 4.0).unwrap();
        let mut b = encode(&SpectralField::zeros(g, FieldTag::Kg), 0.0);
        assert!(matches!(decode(&b[..b.len() - 1], FieldTag::Kg), Err(Error::Format(_))));
        b[4] = 2;
        assert!(matches!(decode(&b, FieldTag::Kg), Err(Error::Format(_))));
        assert!(matches!(decode(b"nope", FieldTag::Kg), Err(Error::Format(_))));
    }
}
