//! Flat binary container of named `f64` tensors.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   8 bytes  "LMMSNAP1"
//! count   u32
//! count × {
//!     name_len u32, name UTF-8
//!     ndim     u32, dims ndim × u64
//!     data     prod(dims) × f64 LE
//! }
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::Params;

const MAGIC: &[u8; 8] = b"LMMSNAP1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Snapshot {
    pub tensors: Vec<Tensor>,
}

impl Snapshot {
    pub fn capture(model: &impl Params) -> Self {
        let mut tensors = Vec::new();
        model.visit("", &mut |name, shape, data| {
            tensors.push(Tensor {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
        Self { tensors }
    }

    /// Copies every tensor back into `model`. Names, order and shapes must
    /// match exactly.
    pub fn restore(&self, model: &mut impl Params) -> Result<()> {
        let mut i = 0;
        let mut err = None;
        model.visit_mut("", &mut |name, shape, data| {
            if err.is_some() {
                return;
            }
            match self.tensors.get(i) {
                Some(t) if t.name == name && t.shape == shape => data.copy_from_slice(&t.data),
                Some(t) => err = Some(format!("tensor {i}: expected `{name}` {shape:?}, found `{}` {:?}", t.name, t.shape)),
                None => err = Some(format!("snapshot ends before `{name}`")),
            }
            i += 1;
        });
        if let Some(e) = err {
            return Err(Error::Snapshot(e));
        }
        if i != self.tensors.len() {
            return Err(Error::Snapshot(format!("{} tensors left unused", self.tensors.len() - i)));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let count = read_u32(r)?;
        let mut tensors = Vec::with_capacity(count.min(1 << 16) as usize);
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Snapshot("tensor name is not UTF-8".into()))?;
            let ndim = read_u32(r)?;
            let mut shape = Vec::with_capacity(ndim as usize);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Snapshot("dimension overflow".into()))?);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Self { tensors })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
