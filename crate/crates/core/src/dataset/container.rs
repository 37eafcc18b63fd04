use std::fs;
use std::path::Path;

use super::CsiMatrix;
use crate::error::{Error, Result};

pub const CONTAINER_MAGIC: &[u8; 4] = b"CSIT";
pub const CONTAINER_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

/// In-memory CSIT container: `count` samples of `channels × len` float32
/// amplitudes, sample-major, channel-major, time-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    count: usize,
    channels: usize,
    len: usize,
    values: Vec<f32>,
}

impl Container {
    pub fn new(channels: usize, len: usize) -> Result<Self> {
        if channels > u16::MAX as usize || len > u16::MAX as usize {
            return Err(Error::Format(format!("{channels}x{len} exceeds u16 header fields")));
        }
        Ok(Self {
            count: 0,
            channels,
            len,
            values: Vec::new(),
        })
    }

    pub fn from_samples(channels: usize, len: usize, samples: &[CsiMatrix<f32>]) -> Result<Self> {
        let mut c = Self::new(channels, len)?;
        for s in samples {
            c.push(s)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, sample: &CsiMatrix<f32>) -> Result<()> {
        if sample.channels() != self.channels || sample.len() != self.len {
            return Err(Error::Shape(format!(
                "sample is {}x{}, container holds {}x{}",
                sample.channels(),
                sample.len(),
                self.channels,
                self.len
            )));
        }
        if self.count == u32::MAX as usize {
            return Err(Error::Format("sample count exceeds u32".into()));
        }
        self.values.extend_from_slice(sample.data());
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn sample(&self, i: usize) -> CsiMatrix<f32> {
        let n = self.channels * self.len;
        CsiMatrix::new(self.channels, self.len, self.values[i * n..][..n].to_vec())
            .expect("container sample has consistent shape")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count as u32).to_le_bytes());
        out.extend_from_slice(&(self.channels as u16).to_le_bytes());
        out.extend_from_slice(&(self.len as u16).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("container truncated: {} header bytes", bytes.len())));
        }
        if &bytes[0..4] != CONTAINER_MAGIC {
            return Err(Error::Format(format!("bad container magic {:?}", &bytes[0..4])));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let count = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let channels = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
        let len = u16::from_le_bytes([bytes[12], bytes[13]]) as usize;
        let n_values = count
            .checked_mul(channels)
            .and_then(|v| v.checked_mul(len))
            .ok_or_else(|| Error::Format("container dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != n_values * 4 {
            return Err(Error::Format(format!(
                "container body has {} bytes, header implies {}",
                body.len(),
                n_values * 4
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        Ok(Self {
            count,
            channels,
            len,
            values,
        })
    }
}

pub fn read_container(path: &Path) -> Result<Container> {
    let bytes = fs::read(path)?;
    Container::from_bytes(&bytes)
}

pub fn write_container(path: &Path, container: &Container) -> Result<()> {
    fs::write(path, container.to_bytes())?;
    Ok(())
}
