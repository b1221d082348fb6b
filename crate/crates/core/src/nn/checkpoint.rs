//! Binary checkpoint format.
//!
//! ```text
//! "PPF1"                     magic
//! u32 version                currently 1
//! u32 n, u32 × n             policy mean-network layer sizes
//! u32 m, u32 × m             value-network layer sizes
//! u64 iteration, u64 seed
//! u32 len, utf-8 bytes       variant label
//! u64 count, f32 × count     mean params ‖ log-std ‖ value params
//! ```
//!
//! Every integer and float is little-endian. Trailing bytes are rejected.

use std::path::Path;

use super::mlp::Mlp;
use super::policy::GaussianPolicy;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PPF1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckpointMeta {
    pub iteration: u64,
    pub seed: u64,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub meta: CheckpointMeta,
}

/// Layer sizes of both networks; used to reject incompatible checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub policy: Vec<usize>,
    pub value: Vec<usize>,
}

impl Checkpoint {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            policy: self.policy.mean.sizes().to_vec(),
            value: self.value.sizes().to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !self.is_finite() {
            return Err(Error::Checkpoint("refusing to serialize non-finite parameters".into()));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for sizes in [self.policy.mean.sizes(), self.value.sizes()] {
            out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
            for &s in sizes {
                out.extend_from_slice(&(s as u32).to_le_bytes());
            }
        }
        out.extend_from_slice(&self.meta.iteration.to_le_bytes());
        out.extend_from_slice(&self.meta.seed.to_le_bytes());
        out.extend_from_slice(&(self.meta.variant.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.variant.as_bytes());
        let blocks = [
            self.policy.mean.params(),
            &self.policy.log_std[..],
            self.value.params(),
        ];
        let count: usize = blocks.iter().map(|b| b.len()).sum();
        out.extend_from_slice(&(count as u64).to_le_bytes());
        for b in blocks {
            for &p in b {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let policy_sizes = r.sizes()?;
        let value_sizes = r.sizes()?;
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let vlen = r.u32()? as usize;
        let variant = std::str::from_utf8(r.take(vlen)?)
            .map_err(|_| Error::Checkpoint("variant label is not utf-8".into()))?
            .to_string();
        let count = r.u64()? as usize;

        let mean = Mlp::zeros(&policy_sizes).map_err(arch_err)?;
        let value = Mlp::zeros(&value_sizes).map_err(arch_err)?;
        if value.output_dim() != 1 {
            return Err(Error::Checkpoint("value network must have one output".into()));
        }
        let act_dim = mean.output_dim();
        let expected = mean.num_params() + act_dim + value.num_params();
        if count != expected {
            return Err(Error::Checkpoint(format!(
                "parameter count {count} does not match architecture ({expected})"
            )));
        }
        let mean_params = r.f32s(mean.num_params())?;
        let log_std = r.f32s(act_dim)?;
        let value_params = r.f32s(value.num_params())?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let ckpt = Checkpoint {
            policy: GaussianPolicy::new(Mlp::from_params(&policy_sizes, mean_params)?, log_std)?,
            value: Mlp::from_params(&value_sizes, value_params)?,
            meta: CheckpointMeta {
                iteration,
                seed,
                variant,
            },
        };
        if !ckpt.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        // Write to a sibling file first so an interrupted save never leaves a
        // truncated checkpoint behind.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks that the networks match `arch`.
    pub fn load_expecting(path: &Path, arch: &Architecture) -> Result<Self> {
        let ckpt = Self::load(path)?;
        let found = ckpt.architecture();
        if &found != arch {
            return Err(Error::Checkpoint(format!(
                "architecture mismatch: expected policy {:?} / value {:?}, found {:?} / {:?}",
                arch.policy, arch.value, found.policy, found.value
            )));
        }
        Ok(ckpt)
    }
}

fn arch_err(e: Error) -> Error {
    Error::Checkpoint(format!("invalid architecture: {e}"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn sizes(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        (0..n).map(|_| self.u32().map(|s| s as usize)).collect()
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Checkpoint("overflow".into()))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}
