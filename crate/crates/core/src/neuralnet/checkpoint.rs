//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "RSPRCKPT"
//! version    u32      1
//! kind       u32 length + UTF-8   ("classifier", "ddae")
//! text       u64 length + UTF-8   canonical key = value block
//! count      u32
//! tensors    count x { u32 name length, name, u32 rank, rank x u64 dims, f32 data }
//! ```
//!
//! Values are stored as `f32`; parameters are kept at `f32` precision while
//! training, so a save/load cycle reproduces forward outputs exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ModelConfig, Network, Tensor};
use crate::{fsutil, Error, Result};

pub const MAGIC: &[u8; 8] = b"RSPRCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Kind tag, text block and named tensors of one checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub text: String,
    pub tensors: Vec<(String, Tensor)>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, len: usize) -> Result<String> {
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        out.extend_from_slice(self.kind.as_bytes());
        out.extend_from_slice(&(self.text.len() as u64).to_le_bytes());
        out.extend_from_slice(self.text.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let klen = r.u32()? as usize;
        let kind = r.string(klen)?;
        let tlen = usize::try_from(r.u64()?).map_err(|_| Error::Checkpoint("text block too large".into()))?;
        let text = r.string(tlen)?;
        let count = r.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = r.string(nlen)?;
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= buf.len()))
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} has implausible dims {dims:?}")))?;
            let raw = r.take(numel * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            let t = Tensor::new(dims, data).map_err(|e| Error::Checkpoint(format!("tensor {name}: {e}")))?;
            tensors.push((name, t));
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Self { kind, text, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Per-epoch training curves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

/// A trained classifier: configuration, tensors, history and free-form
/// metadata (labels, feature settings and the like).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    /// Layer tensors followed by any extra tensors.
    pub tensors: Vec<(String, Tensor)>,
    pub history: TrainingHistory,
    pub meta: BTreeMap<String, String>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn split_floats(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Checkpoint(format!("bad number {x:?} in history"))))
        .collect()
}

impl Checkpoint {
    pub const KIND: &'static str = "classifier";

    pub fn from_network(network: &Network, history: TrainingHistory, meta: BTreeMap<String, String>) -> Self {
        Self {
            config: network.config().clone(),
            tensors: network.stack().named_tensors(),
            history,
            meta,
        }
    }

    /// Adds or replaces a non-layer tensor, rounded to storage precision.
    pub fn set_extra(&mut self, name: &str, mut t: Tensor) {
        t.round_to_f32();
        match self.tensors.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = t,
            None => self.tensors.push((name.to_string(), t)),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Rebuilds the network, checking every layer tensor's shape.
    pub fn network(&self) -> Result<Network> {
        let mut net = Network::new(self.config.clone())?;
        net.stack_mut().load_named(&self.tensors)?;
        Ok(net)
    }

    pub fn to_container(&self) -> Container {
        let mut text = self.config.to_text();
        let h = &self.history;
        let _ = writeln!(text, "history.loss = {}", join(&h.loss));
        let _ = writeln!(text, "history.accuracy = {}", join(&h.accuracy));
        let _ = writeln!(text, "history.val_accuracy = {}", join(&h.val_accuracy));
        for (k, v) in &self.meta {
            let _ = writeln!(text, "meta.{k} = {}", v.replace(['\n', '\r'], " "));
        }
        Container {
            kind: Self::KIND.into(),
            text,
            tensors: self.tensors.clone(),
        }
    }

    pub fn from_container(c: Container) -> Result<Self> {
        if c.kind != Self::KIND {
            return Err(Error::Checkpoint(format!("expected a {} checkpoint, found {:?}", Self::KIND, c.kind)));
        }
        let mut config_text = String::new();
        let mut history = TrainingHistory::default();
        let mut meta = BTreeMap::new();
        for line in c.text.lines() {
            let kv = line.split_once('=').map(|(k, v)| (k.trim(), v.trim()));
            match kv {
                Some(("history.loss", v)) => history.loss = split_floats(v)?,
                Some(("history.accuracy", v)) => history.accuracy = split_floats(v)?,
                Some(("history.val_accuracy", v)) => history.val_accuracy = split_floats(v)?,
                Some((k, v)) if k.starts_with("meta.") => {
                    meta.insert(k["meta.".len()..].to_string(), v.to_string());
                }
                _ => {
                    config_text.push_str(line);
                    config_text.push('\n');
                }
            }
        }
        let config = ModelConfig::parse(&config_text).map_err(|e| Error::Checkpoint(format!("config block: {e}")))?;
        let ckpt = Self {
            config,
            tensors: c.tensors,
            history,
            meta,
        };
        ckpt.network()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(Container::load(path)?)
    }
}
