//! Binary tensor container.
//!
//! ```text
//! "KTSR" | version u16 | dtype u8 (1 = f64, 2 = c128) | ndim u8 | dims u64[ndim] | payload | crc32 u32
//! ```
//! All integers and floats are little-endian, the payload is row-major and
//! the CRC32 covers the payload only.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::encoding::SamplingMask;
use crate::error::{Error, Result};
use crate::numerics::{CTensor, C64};

pub const MAGIC: &[u8; 4] = b"KTSR";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u8 = 1;
pub const DTYPE_C128: u8 = 2;

#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Real { shape: Vec<usize>, data: Vec<f64> },
    Complex(CTensor),
}

impl Tensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            Tensor::Real { shape, .. } => shape,
            Tensor::Complex(c) => c.shape(),
        }
    }
}

pub fn to_bytes(t: &Tensor) -> Vec<u8> {
    let (dtype, payload): (u8, Vec<u8>) = match t {
        Tensor::Real { data, .. } => (
            DTYPE_F64,
            data.iter().flat_map(|v| v.to_le_bytes()).collect(),
        ),
        Tensor::Complex(c) => (
            DTYPE_C128,
            c.data()
                .iter()
                .flat_map(|z| z.re.to_le_bytes().into_iter().chain(z.im.to_le_bytes()))
                .collect(),
        ),
    };
    let shape = t.shape();
    let mut out = Vec::with_capacity(8 + 8 * shape.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dtype);
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn write_container<W: Write>(mut w: W, t: &Tensor) -> Result<()> {
    w.write_all(&to_bytes(t))?;
    Ok(())
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Container("unexpected end of data".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

pub fn read_container<R: Read>(mut r: R) -> Result<Tensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut buf = &bytes[..];
    if take(&mut buf, 4)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    let version = u16::from_le_bytes(take(&mut buf, 2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let dtype = take(&mut buf, 1)?[0];
    let ndim = take(&mut buf, 1)?[0] as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let d = u64::from_le_bytes(take(&mut buf, 8)?.try_into().unwrap());
        shape.push(usize::try_from(d).map_err(|_| Error::Container("dimension overflow".into()))?);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Container("dimension overflow".into()))?;
    let width = match dtype {
        DTYPE_F64 => 8,
        DTYPE_C128 => 16,
        other => return Err(Error::Container(format!("unknown dtype code {other}"))),
    };
    let payload_len = count
        .checked_mul(width)
        .ok_or_else(|| Error::Container("dimension overflow".into()))?;
    let payload = take(&mut buf, payload_len)?;
    let stored = u32::from_le_bytes(take(&mut buf, 4)?.try_into().unwrap());
    if !buf.is_empty() {
        return Err(Error::Container(format!("{} trailing bytes", buf.len())));
    }
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
    Ok(match dtype {
        DTYPE_F64 => Tensor::Real {
            shape,
            data: payload.chunks_exact(8).map(f).collect(),
        },
        _ => {
            let data = payload
                .chunks_exact(16)
                .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
                .collect();
            Tensor::Complex(CTensor::from_vec(&shape, data)?)
        }
    })
}

pub fn load(path: &Path) -> Result<Tensor> {
    read_container(fs::File::open(path)?)
}

pub fn save_real(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::Dimension(format!(
            "shape {shape:?} does not match {} values",
            data.len()
        )));
    }
    let t = Tensor::Real {
        shape: shape.to_vec(),
        data: data.to_vec(),
    };
    fs::write(path, to_bytes(&t))?;
    Ok(())
}

pub fn save_complex(path: &Path, t: &CTensor) -> Result<()> {
    fs::write(path, to_bytes(&Tensor::Complex(t.clone())))?;
    Ok(())
}

/// Loads a complex tensor; real containers are promoted.
pub fn load_complex(path: &Path) -> Result<CTensor> {
    match load(path)? {
        Tensor::Complex(c) => Ok(c),
        Tensor::Real { shape, data } => CTensor::from_real(&shape, &data),
    }
}

pub fn load_real(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    match load(path)? {
        Tensor::Real { shape, data } => Ok((shape, data)),
        Tensor::Complex(_) => Err(Error::Container(format!(
            "{} holds complex data",
            path.display()
        ))),
    }
}

pub fn load_mask(path: &Path, accel_nominal: f64) -> Result<SamplingMask> {
    let (shape, data) = load_real(path)?;
    SamplingMask::from_real(&shape, &data, accel_nominal)
}
