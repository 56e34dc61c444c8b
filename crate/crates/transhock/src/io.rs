//! CSV and binary field output.
//!
//! Binary checkpoints: magic, version, a u32 dimension count, the dimensions,
//! then the row-major payload as little-endian f64. Everything the solver
//! writes is deterministic for a fixed config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Field2, Field3};

const MAGIC: &[u8; 4] = b"TSHK";
const VERSION: u32 = 1;

/// Quote a CSV cell if it contains a separator, quote or newline.
pub fn csv_cell(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let cells: Vec<String> = header.iter().map(|h| csv_cell(h)).collect();
        writeln!(out, "{}", cells.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub struct BinWriter {
    out: BufWriter<File>,
}

impl BinWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write_u32(&mut self, v: u32) -> Result<()> {
        self.out.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn write_f64(&mut self, v: f64) -> Result<()> {
        self.out.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    pub fn write_slice(&mut self, v: &[f64]) -> Result<()> {
        for x in v {
            self.out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_field3(&mut self, f: &Field3) -> Result<()> {
        self.write_u32(3)?;
        self.write_u32(f.n1 as u32)?;
        self.write_u32(f.n2 as u32)?;
        self.write_u32(f.n3 as u32)?;
        self.write_slice(&f.data)
    }

    pub fn write_field2(&mut self, f: &Field2) -> Result<()> {
        self.write_u32(2)?;
        self.write_u32(f.n2 as u32)?;
        self.write_u32(f.n3 as u32)?;
        self.write_slice(&f.data)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub struct BinReader {
    inp: BufReader<File>,
}

impl BinReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut inp = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        inp.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config { message: format!("{}: not a checkpoint file", path.display()) });
        }
        let mut ver = [0u8; 4];
        inp.read_exact(&mut ver)?;
        if u32::from_le_bytes(ver) != VERSION {
            return Err(Error::Config { message: "unsupported checkpoint version".into() });
        }
        Ok(Self { inp })
    }

    pub fn read_u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.inp.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.inp.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn read_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        for v in &mut out {
            *v = self.read_f64()?;
        }
        Ok(out)
    }

    pub fn read_field3(&mut self) -> Result<Field3> {
        if self.read_u32()? != 3 {
            return Err(Error::Config { message: "expected rank-3 field".into() });
        }
        let n1 = self.read_u32()? as usize;
        let n2 = self.read_u32()? as usize;
        let n3 = self.read_u32()? as usize;
        let data = self.read_vec(n1 * n2 * n3)?;
        Ok(Field3 { n1, n2, n3, data })
    }

    pub fn read_field2(&mut self) -> Result<Field2> {
        if self.read_u32()? != 2 {
            return Err(Error::Config { message: "expected rank-2 field".into() });
        }
        let n2 = self.read_u32()? as usize;
        let n3 = self.read_u32()? as usize;
        let data = self.read_vec(n2 * n3)?;
        Ok(Field2 { n2, n3, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let dir = std::env::temp_dir().join("transhock_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.bin");
        let f = Field3 {
            n1: 3,
            n2: 4,
            n3: 5,
            data: (0..60).map(|i| (i as f64).sin() * 1e-3 + i as f64).collect(),
        };
        let mut w = BinWriter::create(&path).unwrap();
        w.write_field3(&f).unwrap();
        w.finish().unwrap();
        let mut r = BinReader::open(&path).unwrap();
        let g = r.read_field3().unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_cell("plain"), "plain");
        assert_eq!(csv_cell("a,b"), "\"a,b\"");
        assert_eq!(csv_cell("q\"q"), "\"q\"\"q\"");
    }
}
