//! DTEN binary tensor files.
//!
//! Layout: `b"DTEN"`, u16 version (1), u8 order, `order` u64 dims, then the
//! f64 entries in canonical order. All integers and floats little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::tensor::{DenseTensor, Matrix};

const MAGIC: &[u8; 4] = b"DTEN";
const VERSION: u16 = 1;

pub fn write_to(t: &DenseTensor, w: &mut impl Write) -> Result<()> {
    ensure!(t.order() <= u8::MAX as usize, Validation, "order {} too large", t.order());
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[t.order() as u8])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(t.len() * 8);
    for x in t.data() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn to_bytes(t: &DenseTensor) -> Vec<u8> {
    let mut v = Vec::new();
    write_to(t, &mut v).expect("writing to memory");
    v
}

pub fn read_from(r: &mut impl Read) -> Result<DenseTensor> {
    let mut head = [0u8; 7];
    r.read_exact(&mut head).map_err(|_| Error::Format("truncated DTEN header".into()))?;
    ensure!(&head[..4] == MAGIC, Format, "bad magic, not a DTEN file");
    let version = u16::from_le_bytes([head[4], head[5]]);
    ensure!(version == VERSION, Format, "unsupported DTEN version {}", version);
    let order = head[6] as usize;
    ensure!(order >= 1, Format, "DTEN order must be positive");
    let mut dims = Vec::with_capacity(order);
    let mut b8 = [0u8; 8];
    for _ in 0..order {
        r.read_exact(&mut b8).map_err(|_| Error::Format("truncated DTEN dims".into()))?;
        let d = u64::from_le_bytes(b8);
        ensure!(d >= 1 && d <= u32::MAX as u64, Format, "bad dimension {}", d);
        dims.push(d as usize);
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("DTEN size overflows".into()))?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    ensure!(raw.len() == n * 8, Format, "DTEN payload has {} bytes, expected {}", raw.len(), n * 8);
    let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    DenseTensor::new(dims, data)
}

pub fn from_bytes(mut b: &[u8]) -> Result<DenseTensor> {
    read_from(&mut b)
}

pub fn write(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_to(t, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_from(&mut f)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    read(path)?.to_matrix()
}
