//! Flat binary density snapshots with an NDJSON index.
//!
//! Layout (little endian): `b"CDSN"`, `u32` version, `u32 d`, `u32 M`,
//! `f64 L`, `u32 n`, `f64 time`, then `n` arrays of `M^d` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DensityField, Grid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CDSN";
const VERSION: u32 = 1;

/// One line of the snapshot index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
    pub dimension: usize,
    pub cells: usize,
    pub half_width: f64,
    pub species: usize,
    pub masses: Vec<f64>,
    pub min_value: f64,
}

pub fn write_snapshot<W: Write>(mut w: W, field: &DensityField) -> std::io::Result<()> {
    let g = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.dimension() as u32).to_le_bytes())?;
    w.write_all(&(g.cells() as u32).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&(field.species_count() as u32).to_le_bytes())?;
    w.write_all(&field.time().to_le_bytes())?;
    for u in field.all_species() {
        for v in u {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<DensityField> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a density snapshot".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let d = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    let l = read_f64(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    let time = read_f64(&mut r)?;
    let grid = Grid::new(d, m, l)?;
    let species = (0..n)
        .map(|_| (0..grid.len()).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    DensityField::new(grid, species, time)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated snapshot: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Writes `snap_{k:04}.bin` per field and `index.ndjson` into `dir`.
pub fn write_snapshot_series(dir: &Path, fields: &[DensityField]) -> Result<Vec<SnapshotEntry>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let index_path = dir.join("index.ndjson");
    let mut index = BufWriter::new(File::create(&index_path).map_err(|e| Error::io(&index_path, e))?);
    let mut entries = Vec::with_capacity(fields.len());
    for (k, field) in fields.iter().enumerate() {
        let name = format!("snap_{k:04}.bin");
        let path = dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_snapshot(&mut w, field)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        let g = field.grid();
        let entry = SnapshotEntry {
            file: name,
            time: field.time(),
            dimension: g.dimension(),
            cells: g.cells(),
            half_width: g.half_width(),
            species: field.species_count(),
            masses: field.masses(),
            min_value: field.min_value(),
        };
        let line = serde_json::to_string(&entry).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(index, "{line}").map_err(|e| Error::io(&index_path, e))?;
        entries.push(entry);
    }
    index.flush().map_err(|e| Error::io(&index_path, e))?;
    Ok(entries)
}

pub fn load_snapshot(path: &Path) -> Result<DensityField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_snapshot(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let grid = Grid::new(2, 8, 1.25).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|f| f as f64 * 0.1).collect();
        let field = DensityField::new(grid, vec![u.clone(), u], 0.3).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &field).unwrap();
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), field);
        assert!(read_snapshot(&buf[..10]).is_err());
    }
}
