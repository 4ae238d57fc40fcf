//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "PRGCNCKP" | version u32 | dtype tag u8 | config_len u32 | config (key = value text)
//! block_count u32 | blocks... | sha256 of everything before it (32 bytes)
//! block: name_len u32 | name | rank u32 | dims u64 x rank | values (dtype, LE)
//! ```
//!
//! Blocks hold every parameter by registry name, batch-norm running
//! statistics as `<bn>.running_mean` / `<bn>.running_var`, and optionally
//! momentum buffers as `<param>@momentum`.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ModelConfig, PrGcnModel};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::numerics::{DType, Float};

const MAGIC: &[u8; 8] = b"PRGCNCKP";
const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;
const MOMENTUM_SUFFIX: &str = "@momentum";

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Block<F> {
    dims: Vec<usize>,
    data: Vec<F>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_block<F: Float>(out: &mut Vec<u8>, name: &str, dims: &[usize], data: &[F]) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, dims.len() as u32);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in data {
        v.write_le(out);
    }
}

/// Serializes parameters, batch-norm statistics and, if asked, momentum.
pub fn save_checkpoint<F: Float>(model: &PrGcnModel<F>, with_momentum: bool) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out.push(F::DTYPE.tag());
    let config = model.config().to_kv();
    put_u32(&mut out, config.len() as u32);
    out.extend_from_slice(config.as_bytes());

    let params = model.parameters();
    let bns = model.batch_norms();
    let count = params.len() * if with_momentum { 2 } else { 1 } + 2 * bns.len();
    put_u32(&mut out, count as u32);
    for p in &params {
        put_block(&mut out, p.name(), p.shape(), p.value().data());
        if with_momentum {
            put_block(&mut out, &format!("{}{MOMENTUM_SUFFIX}", p.name()), p.shape(), p.momentum_buffer());
        }
    }
    for bn in &bns {
        let (mean, var) = bn.running_stats();
        put_block(&mut out, &format!("{}.running_mean", bn.name()), &[mean.len()], &mean);
        put_block(&mut out, &format!("{}.running_var", bn.name()), &[var.len()], &var);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("string is not UTF-8"))
    }
}

/// Verifies the checksum and returns the body reader positioned after the
/// config text.
fn open(bytes: &[u8]) -> Result<(Reader<'_>, String)> {
    if bytes.len() < MAGIC.len() + DIGEST_LEN || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("not a checkpoint file (bad magic or too short)"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch; file is truncated or corrupt"));
    }
    let mut r = Reader { bytes: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let tag = r.take(1)?[0];
    if tag != DType::F32.tag() && tag != DType::F64.tag() {
        return Err(corrupt(format!("unknown dtype tag {tag}")));
    }
    let config = r.string()?;
    Ok((r, config))
}

/// The configuration a checkpoint was saved with.
pub fn checkpoint_config(bytes: &[u8]) -> Result<ModelConfig> {
    let (_, text) = open(bytes)?;
    ModelConfig::from_kv(&text)
}

fn read_blocks<F: Float>(bytes: &[u8]) -> Result<HashMap<String, Block<F>>> {
    let (mut r, _) = open(bytes)?;
    let tag = bytes[MAGIC.len() + 4];
    if tag != F::DTYPE.tag() {
        return Err(corrupt(format!(
            "stored element size {tag} does not match requested {:?}",
            F::DTYPE
        )));
    }
    let count = r.u32()? as usize;
    let mut blocks = HashMap::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len.ok_or_else(|| corrupt(format!("block `{name}` has absurd dims {dims:?}")))?;
        let size = F::DTYPE.size();
        let raw = r.take(len.checked_mul(size).ok_or_else(|| corrupt("block too large"))?)?;
        let data = raw.chunks_exact(size).map(F::read_le).collect();
        if blocks.insert(name.clone(), Block { dims, data }).is_some() {
            return Err(corrupt(format!("duplicate block `{name}`")));
        }
    }
    if r.pos != r.bytes.len() {
        return Err(corrupt("trailing bytes after last block"));
    }
    Ok(blocks)
}

fn take_block<F>(blocks: &mut HashMap<String, Block<F>>, name: &str, dims: &[usize]) -> Result<Vec<F>> {
    let b = blocks
        .remove(name)
        .ok_or_else(|| corrupt(format!("missing block `{name}`")))?;
    if b.dims != dims {
        return Err(corrupt(format!(
            "block `{name}` has shape {:?}, model expects {dims:?}",
            b.dims
        )));
    }
    Ok(b.data)
}

/// Builds a model from `config` and fills it from the checkpoint. Fails
/// without returning a partial model if any block is missing, extra, or
/// shaped differently from what `config` implies.
pub fn load_checkpoint<F: Float>(bytes: &[u8], config: &ModelConfig) -> Result<PrGcnModel<F>> {
    let mut blocks = read_blocks::<F>(bytes)?;
    let mut model = PrGcnModel::<F>::new(config.clone())?;
    for bn in model.batch_norms() {
        let c = [bn.channels()];
        let mean = take_block(&mut blocks, &format!("{}.running_mean", bn.name()), &c)?;
        let var = take_block(&mut blocks, &format!("{}.running_var", bn.name()), &c)?;
        bn.set_running_stats(mean, var);
    }
    for p in model.parameters_mut() {
        let shape = p.shape().to_vec();
        p.set_data(take_block(&mut blocks, p.name(), &shape)?)?;
        let momentum_name = format!("{}{MOMENTUM_SUFFIX}", p.name());
        if blocks.contains_key(&momentum_name) {
            p.set_momentum(take_block(&mut blocks, &momentum_name, &shape)?)?;
        }
    }
    if let Some(name) = blocks.keys().min() {
        return Err(corrupt(format!("block `{name}` does not belong to this model")));
    }
    Ok(model)
}

pub fn write_checkpoint<F: Float>(model: &PrGcnModel<F>, path: impl AsRef<Path>, with_momentum: bool) -> Result<()> {
    std::fs::write(path, save_checkpoint(model, with_momentum))?;
    Ok(())
}

/// Loads a checkpoint file with the configuration stored inside it.
pub fn read_checkpoint<F: Float>(path: impl AsRef<Path>) -> Result<PrGcnModel<F>> {
    let bytes = std::fs::read(path)?;
    load_checkpoint(&bytes, &checkpoint_config(&bytes)?)
}
