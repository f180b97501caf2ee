//! Binary field snapshots.
//!
//! Little-endian layout: magic `CHQS`, version u32, N u32, M u32, L f64, t f64,
//! α f64, b f64, p f64, then `M^N` interleaved `(re, im)` f64 pairs in row-major order.

use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::model::ModelParams;
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"CHQS";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 3 * 4 + 5 * 8;

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub params: ModelParams,
    pub field: ComplexField,
}

pub fn encode(field: &ComplexField, time: f64, params: &ModelParams) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.points_per_axis() as u32).to_le_bytes());
    for v in [g.box_length(), time, params.alpha, params.b, params.p] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in field.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Snapshot(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let (dim, m) = (u32_at(8) as usize, u32_at(12) as usize);
    let l = f64_at(16);
    let time = f64_at(24);
    let params = ModelParams { dim, alpha: f64_at(32), b: f64_at(40), p: f64_at(48) };
    let grid = SpatialGrid::new(dim, l, m).map_err(|e| Error::Snapshot(format!("header grid: {e}")))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Snapshot(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
        .collect();
    Ok(Snapshot { time, params, field: ComplexField::from_values(grid, values)? })
}

pub fn write(path: &Path, field: &ComplexField, time: f64, params: &ModelParams) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode(field, time, params))?;
    f.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let g = SpatialGrid::new(3, 5.0, 4).unwrap();
        let u = ComplexField::from_fn(g, |x| Complex64::new(x[0].sin(), 1.0 / (1.0 + x[1] * x[1] + x[2])));
        let params = ModelParams::secondary();
        let bytes = encode(&u, 0.125, &params);
        assert_eq!(&bytes[..4], b"CHQS");
        assert_eq!(bytes.len(), HEADER_LEN + 16 * 64);
        let s = decode(&bytes).unwrap();
        assert_eq!(s.time, 0.125);
        assert_eq!(s.params, params);
        assert_eq!(s.field.values(), u.values());
        assert_eq!(encode(&s.field, s.time, &s.params), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let g = SpatialGrid::new(1, 1.0, 4).unwrap();
        let bytes = encode(&ComplexField::zeros(g), 0.0, &ModelParams::reference());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 9;
        assert!(decode(&bad).is_err());
    }
}
