//! Binary checkpoint of a [`SacAgent`].
//!
//! Layout (little endian): magic, format version, dtype tag, config hash,
//! update counter, then a list of named arrays each with its shape header.
//! Optimizer step counters are stored as one-element arrays.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::mlp::Mlp;
use super::real::Real;
use super::sac::{SacAgent, SacConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPARQCK\x01";
const VERSION: u32 = 1;

struct Entry<T> {
    name: String,
    shape: Vec<usize>,
    data: Vec<T>,
}

fn net_entries<T: Real>(prefix: &str, net: &Mlp<T>, out: &mut Vec<Entry<T>>) {
    for (i, (t, shape)) in net.tensors().iter().zip(net.shapes()).enumerate() {
        out.push(Entry {
            name: format!("{prefix}.{i}"),
            shape,
            data: t.to_vec(),
        });
    }
}

fn adam_entries<T: Real>(prefix: &str, opt: &Adam<T>, out: &mut Vec<Entry<T>>) {
    for (kind, moments) in [("m", &opt.m), ("v", &opt.v)] {
        for (i, v) in moments.iter().enumerate() {
            out.push(Entry {
                name: format!("{prefix}.{kind}.{i}"),
                shape: vec![v.len()],
                data: v.clone(),
            });
        }
    }
}

fn entries<T: Real>(agent: &SacAgent<T>) -> Vec<Entry<T>> {
    let mut out = Vec::new();
    net_entries("actor", &agent.actor, &mut out);
    net_entries("critic1", &agent.critic1, &mut out);
    net_entries("critic2", &agent.critic2, &mut out);
    net_entries("target1", &agent.target1, &mut out);
    net_entries("target2", &agent.target2, &mut out);
    out.push(Entry {
        name: "log_alpha".into(),
        shape: vec![1],
        data: vec![agent.log_alpha],
    });
    adam_entries("actor_opt", &agent.actor_opt, &mut out);
    adam_entries("critic1_opt", &agent.critic1_opt, &mut out);
    adam_entries("critic2_opt", &agent.critic2_opt, &mut out);
    adam_entries("alpha_opt", &agent.alpha_opt, &mut out);
    out
}

fn opt_steps<T>(agent: &SacAgent<T>) -> [u64; 4] {
    [
        agent.actor_opt.step,
        agent.critic1_opt.step,
        agent.critic2_opt.step,
        agent.alpha_opt.step,
    ]
}

pub fn encode<T: Real>(agent: &SacAgent<T>, config_hash: &str) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(T::TAG);
    buf.extend_from_slice(&(config_hash.len() as u32).to_le_bytes());
    buf.extend_from_slice(config_hash.as_bytes());
    buf.extend_from_slice(&agent.updates.to_le_bytes());
    for s in opt_steps(agent) {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    let entries = entries(agent);
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for d in &e.shape {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        e.data.iter().for_each(|v| v.put_le(&mut buf));
    }
    buf
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
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8 name".into()))
    }
}

/// Decodes a checkpoint into an agent built for `cfg`; returns the agent and
/// the stored config hash.
pub fn decode<T: Real>(bytes: &[u8], cfg: &SacConfig) -> Result<(SacAgent<T>, String)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let tag = r.take(1)?[0];
    if tag != T::TAG {
        return Err(Error::Checkpoint(format!("dtype tag {tag}, expected {}", T::TAG)));
    }
    let config_hash = r.string()?;
    let updates = r.u64()?;
    let steps = [r.u64()?, r.u64()?, r.u64()?, r.u64()?];

    let mut agent = SacAgent::<T>::new(cfg, &mut ChaCha8Rng::seed_from_u64(0))?;
    agent.updates = updates;
    agent.actor_opt.step = steps[0];
    agent.critic1_opt.step = steps[1];
    agent.critic2_opt.step = steps[2];
    agent.alpha_opt.step = steps[3];

    let expected = entries(&agent);
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!("{count} arrays, expected {}", expected.len())));
    }
    let width = T::TAG as usize;
    let mut loaded = Vec::with_capacity(count);
    for want in &expected {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if name != want.name || shape != want.shape {
            return Err(Error::Checkpoint(format!(
                "array {name} {shape:?} does not match {} {:?}",
                want.name, want.shape
            )));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * width)?;
        loaded.push(raw.chunks_exact(width).map(T::get_le).collect::<Vec<T>>());
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }

    let mut it = loaded.into_iter();
    for net in [
        &mut agent.actor,
        &mut agent.critic1,
        &mut agent.critic2,
        &mut agent.target1,
        &mut agent.target2,
    ] {
        for t in net.tensors_mut() {
            t.copy_from_slice(&it.next().expect("counted"));
        }
    }
    agent.log_alpha = it.next().expect("counted")[0];
    for opt in [
        &mut agent.actor_opt,
        &mut agent.critic1_opt,
        &mut agent.critic2_opt,
        &mut agent.alpha_opt,
    ] {
        for i in 0..opt.m.len() {
            opt.m[i] = it.next().expect("counted");
        }
        for i in 0..opt.v.len() {
            opt.v[i] = it.next().expect("counted");
        }
    }
    Ok((agent, config_hash))
}

pub fn save<T: Real>(agent: &SacAgent<T>, config_hash: &str, path: &Path) -> Result<()> {
    fs::write(path, encode(agent, config_hash))?;
    Ok(())
}

pub fn load<T: Real>(path: &Path, cfg: &SacConfig) -> Result<(SacAgent<T>, String)> {
    decode(&fs::read(path)?, cfg)
}
