//! Binary save/load for unitary parameters.
//!
//! Layout: magic `PUNN`, version u32, n u32, field u8 (0 real / 1 complex),
//! mode u8 (0 direct / 1 tangent), then the matrix entries row-major as
//! little-endian f64 (two per entry when complex). The loader re-verifies
//! unitarity and rejects drifted or corrupted files.

use super::{UnitaryParameter, UpdateMode};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Entry, Field};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"PUNN";
const VERSION: u32 = 1;

/// A parameter of either field, as recovered from disk.
#[derive(Debug)]
pub enum AnyParameter {
    Real(UnitaryParameter<f64>),
    Complex(UnitaryParameter<Complex64>),
}

impl AnyParameter {
    pub fn field(&self) -> Field {
        match self {
            AnyParameter::Real(_) => Field::Real,
            AnyParameter::Complex(_) => Field::Complex,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyParameter::Real(p) => p.dim(),
            AnyParameter::Complex(p) => p.dim(),
        }
    }
}

fn mode_byte(mode: UpdateMode) -> u8 {
    match mode {
        UpdateMode::Direct => 0,
        UpdateMode::Tangent => 1,
    }
}

pub fn save_parameter<T: Entry>(
    path: &Path,
    param: &UnitaryParameter<T>,
    mode: UpdateMode,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(param.dim() as u32).to_le_bytes())?;
    let field_byte = match T::FIELD {
        Field::Real => 0u8,
        Field::Complex => 1u8,
    };
    w.write_all(&[field_byte, mode_byte(mode)])?;
    for &x in param.matrix().data() {
        w.write_all(&x.re().to_le_bytes())?;
        if T::FIELD == Field::Complex {
            w.write_all(&x.im().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn load_parameter(path: &Path) -> Result<(AnyParameter, UpdateMode)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| truncated(path))?;
    if &magic != MAGIC {
        return Err(Error::CorruptedFile(format!("{}: bad magic", path.display())));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| truncated(path))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::CorruptedFile(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    r.read_exact(&mut word).map_err(|_| truncated(path))?;
    let n = u32::from_le_bytes(word) as usize;
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags).map_err(|_| truncated(path))?;
    let mode = match tags[1] {
        0 => UpdateMode::Direct,
        1 => UpdateMode::Tangent,
        other => {
            return Err(Error::CorruptedFile(format!("{}: bad mode byte {other}", path.display())))
        }
    };

    let any = match tags[0] {
        0 => {
            let mut data = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                data.push(read_f64(&mut r).map_err(|_| truncated(path))?);
            }
            let matrix = DenseMatrix::from_row_major(n, n, data)?;
            AnyParameter::Real(checked(path, matrix)?)
        }
        1 => {
            let mut data = Vec::with_capacity(n * n);
            for _ in 0..n * n {
                let re = read_f64(&mut r).map_err(|_| truncated(path))?;
                let im = read_f64(&mut r).map_err(|_| truncated(path))?;
                data.push(Complex64::new(re, im));
            }
            let matrix = DenseMatrix::from_row_major(n, n, data)?;
            AnyParameter::Complex(checked(path, matrix)?)
        }
        other => {
            return Err(Error::CorruptedFile(format!(
                "{}: bad field byte {other}",
                path.display()
            )))
        }
    };
    Ok((any, mode))
}

fn checked<T: Entry>(path: &Path, matrix: DenseMatrix<T>) -> Result<UnitaryParameter<T>> {
    UnitaryParameter::from_matrix(matrix).map_err(|e| {
        Error::CorruptedFile(format!("{}: stored matrix rejected: {e}", path.display()))
    })
}

fn truncated(path: &Path) -> Error {
    Error::CorruptedFile(format!("{}: truncated", path.display()))
}
