//! CKPT parameter files: magic, version, then named float32 tensors until EOF.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ResNet1d;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub records: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn new(records: Vec<(String, Tensor<f32>)>) -> Self {
        Self { records }
    }

    /// Parameters and batch-norm buffers of `net`, in visiting order.
    pub fn from_network<T: Scalar>(net: &mut ResNet1d<T>) -> Self {
        let records = net
            .state()
            .into_iter()
            .map(|(n, t)| {
                let values = t.cast::<f32>().into_data();
                let t = Tensor::from_vec(t.shape(), values).expect("same shape");
                (n, t)
            })
            .collect();
        Self { records }
    }

    /// Loads every record into `net`; names and shapes must match exactly.
    pub fn apply_to<T: Scalar>(&self, net: &mut ResNet1d<T>) -> Result<()> {
        net.load_state(&self.records)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for (name, t) in &self.records {
            let name_len = u16::try_from(name.len())
                .map_err(|_| Error::Format(format!("record name too long: {} bytes", name.len())))?;
            let rank = u8::try_from(t.rank())
                .map_err(|_| Error::Format(format!("'{name}' has rank {}", t.rank())))?;
            out.extend_from_slice(&name_len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(rank);
            for &d in t.shape() {
                let d = u32::try_from(d).map_err(|_| Error::Format(format!("'{name}' dim {d} exceeds u32")))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut records = Vec::new();
        while r.pos < bytes.len() {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("record name is not UTF-8".into()))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("'{name}' size overflows")))?;
            let payload = r.take(n.checked_mul(4).ok_or_else(|| Error::Format("payload overflow".into()))?)?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            records.push((name, Tensor::from_vec(&shape, data)?));
        }
        Ok(Self { records })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("checkpoint truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
