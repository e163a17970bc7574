//! Binary field snapshots (`.pwf`).
//!
//! Layout, little-endian: magic `PWF1`, `u32 n`, `f64 box_length`,
//! `u32 component_count`, `u32 complex_flag`, then each component in turn as
//! `n³` values (`f64`, or interleaved `re, im` pairs when complex) with `x`
//! varying fastest.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::real::{Cplx, Real};
use crate::spinor::SpinorField;

pub const MAGIC: &[u8; 4] = b"PWF1";

#[derive(Clone, Debug, PartialEq)]
pub enum SnapshotData {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<Cplx<f64>>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub box_length: f64,
    pub data: SnapshotData,
}

impl Snapshot {
    pub fn component_count(&self) -> usize {
        match &self.data {
            SnapshotData::Real(c) => c.len(),
            SnapshotData::Complex(c) => c.len(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.data, SnapshotData::Complex(_))
    }

    pub fn from_scalar<T: Real>(f: &ScalarField<T>) -> Self {
        Self::real(f.grid(), vec![to_f64(f.values())])
    }

    pub fn from_vector<T: Real>(v: &VectorField<T>) -> Self {
        Self::real(v.grid(), v.components().iter().map(|c| to_f64(c)).collect())
    }

    pub fn from_spinor<T: Real>(u: &SpinorField<T>) -> Self {
        let conv = |c: &[Cplx<T>]| c.iter().map(|z| Cplx::new(z.re.as_f64(), z.im.as_f64())).collect();
        Self {
            n: u.grid().n(),
            box_length: u.grid().box_length().as_f64(),
            data: SnapshotData::Complex(vec![conv(u.u1()), conv(u.u2())]),
        }
    }

    fn real<T: Real>(grid: &Grid<T>, comps: Vec<Vec<f64>>) -> Self {
        Self {
            n: grid.n(),
            box_length: grid.box_length().as_f64(),
            data: SnapshotData::Real(comps),
        }
    }

    /// The grid described by the header.
    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.n, self.box_length)
    }

    pub fn to_spinor(&self, grid: &Grid<f64>) -> Result<SpinorField<f64>> {
        self.check_grid(grid)?;
        match &self.data {
            SnapshotData::Complex(c) if c.len() == 2 => {
                SpinorField::from_components(grid, c[0].clone(), c[1].clone())
            }
            _ => Err(Error::Snapshot(format!(
                "expected 2 complex components for a spinor, found {} {}",
                self.component_count(),
                if self.is_complex() { "complex" } else { "real" }
            ))),
        }
    }

    pub fn to_vector(&self, grid: &Grid<f64>) -> Result<VectorField<f64>> {
        self.check_grid(grid)?;
        match &self.data {
            SnapshotData::Real(c) if c.len() == 3 => {
                VectorField::from_components(grid, [c[0].clone(), c[1].clone(), c[2].clone()])
            }
            _ => Err(Error::Snapshot("expected 3 real components for a vector field".into())),
        }
    }

    pub fn to_scalar(&self, grid: &Grid<f64>) -> Result<ScalarField<f64>> {
        self.check_grid(grid)?;
        match &self.data {
            SnapshotData::Real(c) if c.len() == 1 => ScalarField::from_values(grid, c[0].clone()),
            _ => Err(Error::Snapshot("expected 1 real component for a scalar field".into())),
        }
    }

    fn check_grid(&self, grid: &Grid<f64>) -> Result<()> {
        if grid.n() != self.n || grid.box_length() != self.box_length {
            return Err(Error::Snapshot(format!(
                "snapshot grid n = {}, L = {} does not match n = {}, L = {}",
                self.n,
                self.box_length,
                grid.n(),
                grid.box_length()
            )));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let n = u32::try_from(self.n).map_err(|_| Error::Snapshot("n too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.box_length.to_le_bytes())?;
        w.write_all(&(self.component_count() as u32).to_le_bytes())?;
        w.write_all(&(self.is_complex() as u32).to_le_bytes())?;
        let mut buf = Vec::new();
        match &self.data {
            SnapshotData::Real(c) => {
                for comp in c {
                    for x in comp {
                        buf.extend_from_slice(&x.to_le_bytes());
                    }
                }
            }
            SnapshotData::Complex(c) => {
                for comp in c {
                    for z in comp {
                        buf.extend_from_slice(&z.re.to_le_bytes());
                        buf.extend_from_slice(&z.im.to_le_bytes());
                    }
                }
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Snapshot(format!("bad magic {magic:?}")));
        }
        let n = read_u32(&mut r)? as usize;
        let box_length = f64::from_le_bytes(read_array(&mut r)?);
        let count = read_u32(&mut r)? as usize;
        let complex = match read_u32(&mut r)? {
            0 => false,
            1 => true,
            other => return Err(Error::Snapshot(format!("complex flag must be 0 or 1, got {other}"))),
        };
        if n == 0 || count == 0 {
            return Err(Error::Snapshot("empty snapshot".into()));
        }
        let len = n
            .checked_mul(n)
            .and_then(|x| x.checked_mul(n))
            .ok_or_else(|| Error::Snapshot("n too large".into()))?;
        let per = if complex { 16 } else { 8 };
        let mut bytes = vec![0u8; len * per * count];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Snapshot(format!("truncated payload: {e}")))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Snapshot("trailing bytes after payload".into()));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
        let data = if complex {
            SnapshotData::Complex(
                (0..count)
                    .map(|c| (0..len).map(|i| Cplx::new(f(2 * (c * len + i)), f(2 * (c * len + i) + 1))).collect())
                    .collect(),
            )
        } else {
            SnapshotData::Real((0..count).map(|c| (0..len).map(|i| f(c * len + i)).collect()).collect())
        };
        Ok(Self { n, box_length, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Snapshot(format!("truncated header: {e}")))?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

/// File name of the snapshot taken at step `index`: `NNNNNN.pwf`.
pub fn snapshot_name(index: usize) -> String {
    format!("{index:06}.pwf")
}
