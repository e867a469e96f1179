//! Versioned binary checkpoint container: model parameters, optimizer
//! moments, epoch index, RNG position, and a config fingerprint that
//! guards against evaluating a checkpoint under a different protocol.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "NRCP" | version u16 | precision u8 (4|8) | config_hash u64
//! epoch u32 | adam_steps u64 | rng_seed u64 | rng_word_pos u128
//! param_count u32
//! per parameter:
//!   name_len u16 | name bytes | ndims u8 | dims u64 × ndims
//!   values f64 × numel | adam_m f64 × numel | adam_v f64 × numel
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::params::ParamSet;
use crate::runner::adam::Adam;
use crate::tensor::Scalar;

const MAGIC: &[u8; 4] = b"NRCP";
const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub precision_bytes: u8,
    pub config_hash: u64,
    pub epoch: u32,
    pub adam_steps: u64,
    pub rng_seed: u64,
    pub rng_word_pos: u128,
}

pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Vec<(String, Vec<usize>, Vec<f64>)>,
    pub adam_m: Vec<Vec<f64>>,
    pub adam_v: Vec<Vec<f64>>,
}

fn write_u16(w: &mut impl Write, v: u16) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
fn read_u16(r: &mut impl Read) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact::<2>(r)?))
}
fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4>(r)?))
}
fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8>(r)?))
}
fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(f64::from_le_bytes(read_exact::<8>(r)?));
    }
    Ok(out)
}

pub fn save<T: Scalar>(
    path: &Path,
    model: &Model<T>,
    adam: &Adam<T>,
    meta: &CheckpointMeta,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u16(&mut w, VERSION)?;
    w.write_all(&[meta.precision_bytes])?;
    write_u64(&mut w, meta.config_hash)?;
    write_u32(&mut w, meta.epoch)?;
    write_u64(&mut w, meta.adam_steps)?;
    write_u64(&mut w, meta.rng_seed)?;
    w.write_all(&meta.rng_word_pos.to_le_bytes())?;

    let trainable: Vec<_> = model.params.trainable().collect();
    let (m, v) = adam.moments();
    if m.len() != trainable.len() {
        return Err(Error::Checkpoint(
            "optimizer moments misaligned with parameters".into(),
        ));
    }
    write_u32(&mut w, trainable.len() as u32)?;
    for (i, p) in trainable.iter().enumerate() {
        let name = p.name().as_bytes();
        write_u16(&mut w, name.len() as u16)?;
        w.write_all(name)?;
        let dims = p.shape();
        w.write_all(&[dims.len() as u8])?;
        for &d in dims {
            write_u64(&mut w, d as u64)?;
        }
        let values: Vec<f64> = p.tensor().values().iter().map(|x| x.as_f64()).collect();
        write_f64s(&mut w, &values)?;
        write_f64s(&mut w, &m[i].iter().map(|x| x.as_f64()).collect::<Vec<_>>())?;
        write_f64s(&mut w, &v[i].iter().map(|x| x.as_f64()).collect::<Vec<_>>())?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_exact::<4>(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let version = read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let precision_bytes = read_exact::<1>(&mut r)?[0];
    let config_hash = read_u64(&mut r)?;
    let epoch = read_u32(&mut r)?;
    let adam_steps = read_u64(&mut r)?;
    let rng_seed = read_u64(&mut r)?;
    let rng_word_pos = u128::from_le_bytes(read_exact::<16>(&mut r)?);

    let count = read_u32(&mut r)? as usize;
    let mut params = Vec::with_capacity(count);
    let mut adam_m = Vec::with_capacity(count);
    let mut adam_v = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u16(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("invalid parameter name encoding".into()))?;
        let ndims = read_exact::<1>(&mut r)?[0] as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = dims.iter().product();
        params.push((name, dims, read_f64s(&mut r, numel)?));
        adam_m.push(read_f64s(&mut r, numel)?);
        adam_v.push(read_f64s(&mut r, numel)?);
    }
    Ok(Checkpoint {
        meta: CheckpointMeta {
            precision_bytes,
            config_hash,
            epoch,
            adam_steps,
            rng_seed,
            rng_word_pos,
        },
        params,
        adam_m,
        adam_v,
    })
}

/// Copy checkpointed values into a freshly built model and optimizer.
/// Names and shapes must line up exactly.
pub fn apply<T: Scalar>(
    checkpoint: &Checkpoint,
    params: &ParamSet<T>,
    adam: &mut Adam<T>,
) -> Result<()> {
    let trainable: Vec<_> = params.trainable().collect();
    if trainable.len() != checkpoint.params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} parameters, model has {}",
            checkpoint.params.len(),
            trainable.len()
        )));
    }
    for (p, (name, dims, values)) in trainable.iter().zip(checkpoint.params.iter()) {
        if p.name() != name || p.shape() != dims.as_slice() {
            return Err(Error::Checkpoint(format!(
                "parameter mismatch: checkpoint {name} {dims:?} vs model {} {:?}",
                p.name(),
                p.shape()
            )));
        }
        let typed: Vec<T> = values.iter().map(|&v| T::from_f64(v)).collect();
        p.tensor().set_values(&typed)?;
        p.tensor().zero_grad();
    }
    let m = checkpoint
        .adam_m
        .iter()
        .map(|row| row.iter().map(|&v| T::from_f64(v)).collect())
        .collect();
    let v = checkpoint
        .adam_v
        .iter()
        .map(|row| row.iter().map(|&v| T::from_f64(v)).collect())
        .collect();
    adam.restore_moments(m, v, checkpoint.meta.adam_steps);
    Ok(())
}
