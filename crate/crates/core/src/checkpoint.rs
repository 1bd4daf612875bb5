//! Binary checkpoint container.
//!
//! Layout (little endian): magic `GZATCKPT`, `u32` version, `u64` training
//! step, `u32`-length-prefixed UTF-8 key/value config text, `u32` tensor
//! count, then per tensor: `u8` kind (0 parameter, 1 buffer), `u8` group,
//! `u32`-prefixed name, `u32` rank, `u64` dims, raw `f64` data.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::nn::{Group, Param, ParamStore};

const MAGIC: &[u8; 8] = b"GZATCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    /// Full config snapshot; the model section lives under `model.`.
    pub config: KvConfig,
    pub store: ParamStore,
}

impl Checkpoint {
    pub fn from_model(model: &Model, step: u64, extra: Option<&KvConfig>) -> Self {
        let mut config = KvConfig::new();
        if let Some(e) = extra {
            config.merge(e);
        }
        for (k, v) in model.config().to_kv().iter() {
            config.set(format!("model.{k}"), v);
        }
        Self {
            step,
            config,
            store: model.store.clone(),
        }
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        ModelConfig::from_kv(&self.config.section("model"))
    }

    pub fn into_model(self) -> Result<Model> {
        let cfg = self.model_config()?;
        Model::from_store(cfg, self.store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        put_str(&mut out, &self.config.to_text());
        let tensors = self.store.params.len() + self.store.buffers.len();
        out.extend_from_slice(&(tensors as u32).to_le_bytes());
        for (kind, list) in [(0u8, &self.store.params), (1u8, &self.store.buffers)] {
            for p in list {
                out.push(kind);
                out.push(Group::ALL.iter().position(|g| *g == p.group).expect("group") as u8);
                put_str(&mut out, &p.name);
                out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
                for &d in &p.shape {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                for v in &p.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let step = r.u64()?;
        let text = r.string()?;
        let config = KvConfig::parse(&text, Path::new("<checkpoint>"))?;
        let count = r.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let kind = r.u8()?;
            let group = *Group::ALL
                .get(r.u8()? as usize)
                .ok_or_else(|| Error::Checkpoint("unknown parameter group".into()))?;
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let p = Param { name, group, shape, data };
            match kind {
                0 => store.params.push(p),
                1 => store.buffers.push(p),
                k => return Err(Error::Checkpoint(format!("unknown tensor kind {k}"))),
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        Ok(Self { step, config, store })
    }

    /// Writes through a temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}
