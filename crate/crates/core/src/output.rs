//! File writers. Every number is written with 17 significant digits so that
//! a value read back is bit-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::energy::{EnergyReport, CSV_HEADER};
use crate::error::Result;
use crate::solver::{CharacteristicState, Grid};

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

/// Generic CSV table with a fixed header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Key-value summary, one `key = value` line each.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Streams slices as CSV rows `t,field,j,x,phi,p,q`.
pub struct CsvSnapshotWriter {
    w: BufWriter<File>,
}

impl CsvSnapshotWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t,field,j,x,phi,p,q")?;
        Ok(Self { w })
    }

    pub fn write(&mut self, s: &CharacteristicState, grid: &Grid) -> Result<()> {
        for (k, f) in s.fields.iter().enumerate() {
            for j in 0..grid.m {
                writeln!(
                    self.w,
                    "{},{k},{j},{},{},{},{}",
                    fmt_num(s.t),
                    fmt_num(grid.x(j)),
                    fmt_num(f.phi[j]),
                    fmt_num(f.p[j]),
                    fmt_num(f.q[j])
                )?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Streams slices in a little-endian binary layout: a header
/// `b"NWSNAP01"`, `u64 fields`, `u64 m`, `f64 x_min`, `f64 h`, then per
/// slice `u64 step`, `f64 t` and for each field `phi`, `p`, `q` as `m`
/// doubles each.
pub struct BinarySnapshotWriter {
    w: BufWriter<File>,
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NWSNAP01";

impl BinarySnapshotWriter {
    pub fn create(path: &Path, fields: usize, grid: &Grid) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(fields as u64).to_le_bytes())?;
        w.write_all(&(grid.m as u64).to_le_bytes())?;
        w.write_all(&grid.x_min.to_le_bytes())?;
        w.write_all(&grid.h.to_le_bytes())?;
        Ok(Self { w })
    }

    pub fn write(&mut self, s: &CharacteristicState) -> Result<()> {
        self.w.write_all(&(s.step as u64).to_le_bytes())?;
        self.w.write_all(&s.t.to_le_bytes())?;
        for f in &s.fields {
            for arr in [&f.phi, &f.p, &f.q] {
                for v in arr.iter() {
                    self.w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, -0.0, 1.0, 0.1, std::f64::consts::PI, 1e-300, 6.02e23, -2.5e-7] {
            let s = fmt_num(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn binary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let grid = Grid::new(0.0, 1.0, 3).unwrap();
        let mut s = CharacteristicState::zeros(1, 3);
        s.fields[0].p[1] = 2.5;
        let mut w = BinarySnapshotWriter::create(&path, 1, &grid).unwrap();
        w.write(&s).unwrap();
        w.finish().unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 4 * 8 + 2 * 8 + 9 * 8);
        assert_eq!(&bytes[..8], SNAPSHOT_MAGIC);
        let off = 40 + 16 + 3 * 8 + 8;
        assert_eq!(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()), 2.5);
    }
}
