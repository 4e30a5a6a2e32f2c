//! Binary checkpoints: `CGAN`, u32 version, u64 header length, a JSON
//! header with the config, step and tensor table, then every table entry as
//! little-endian f64 values in table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build, GanConfig, GanModel};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Sequential};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CGAN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TableEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: GanConfig,
    step: u64,
    adam_steps: [u64; 2],
    tensors: Vec<TableEntry>,
}

/// Every persisted tensor of one network and its optimizer, in a fixed
/// order: parameters, buffers, first moments, second moments.
fn collect<'a>(
    prefix: &str,
    net: &'a Sequential<f64>,
    opt: &'a AdamState<f64>,
    out: &mut Vec<(String, Vec<usize>, &'a [f64])>,
) {
    let params = net.named_params();
    for (n, p) in &params {
        out.push((format!("{prefix}.{n}"), p.tensor.shape().to_vec(), p.tensor.data()));
    }
    for (n, b) in net.named_buffers() {
        out.push((format!("{prefix}.{n}"), b.shape().to_vec(), b.data()));
    }
    for (moment, store) in [("m", &opt.m), ("v", &opt.v)] {
        for ((n, p), values) in params.iter().zip(store.iter()) {
            out.push((format!("{prefix}.adam.{moment}.{n}"), p.tensor.shape().to_vec(), values));
        }
    }
}

fn table(model: &GanModel) -> Vec<(String, Vec<usize>, &[f64])> {
    let mut out = Vec::new();
    collect("generator", &model.generator, &model.opt_g, &mut out);
    collect("discriminator", &model.discriminator, &model.opt_d, &mut out);
    out
}

pub fn write_checkpoint(model: &GanModel) -> Result<Vec<u8>> {
    let entries = table(model);
    let header = Header {
        config: model.config.clone(),
        step: model.step,
        adam_steps: [model.opt_g.step, model.opt_d.step],
        tensors: entries
            .iter()
            .map(|(name, shape, _)| TableEntry {
                name: name.clone(),
                shape: shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let values: usize = entries.iter().map(|e| e.2.len()).sum();
    let mut bytes = Vec::with_capacity(16 + json.len() + 8 * values);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for (_, _, data) in entries {
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, field: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::checkpoint(field, format!("truncated: need {n} bytes, {} left", bytes.len())));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

/// Decode a checkpoint; nothing is returned unless every field checks out.
pub fn read_checkpoint(mut bytes: &[u8]) -> Result<GanModel> {
    let rest = &mut bytes;
    if take(rest, 4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::checkpoint("magic", "not a CGAN checkpoint"));
    }
    let version = u32::from_le_bytes(take(rest, 4, "version")?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::checkpoint("version", format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(take(rest, 8, "header_length")?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| Error::checkpoint("header_length", "too large"))?;
    let header: Header =
        serde_json::from_slice(take(rest, len, "header")?).map_err(|e| Error::checkpoint("header", e.to_string()))?;

    let mut model = build(&header.config).map_err(|e| Error::checkpoint("config", e.to_string()))?;
    let expected: Vec<(String, Vec<usize>)> = table(&model).into_iter().map(|(n, s, _)| (n, s)).collect();
    if header.tensors.len() != expected.len() {
        return Err(Error::checkpoint(
            "tensors",
            format!("table has {} entries, config implies {}", header.tensors.len(), expected.len()),
        ));
    }
    for (entry, (name, shape)) in header.tensors.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::checkpoint(
                "tensors",
                format!("entry {} {:?} does not match {name} {shape:?}", entry.name, entry.shape),
            ));
        }
    }
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if rest.len() != 8 * total {
        return Err(Error::checkpoint(
            "data",
            format!("expected {} bytes of tensor data, found {}", 8 * total, rest.len()),
        ));
    }
    let mut values = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|v| *v = values.next().expect("length checked"));
    for (net, opt) in [
        (&mut model.generator, &mut model.opt_g),
        (&mut model.discriminator, &mut model.opt_d),
    ] {
        for layer in net.layers_mut() {
            for p in layer.params_mut() {
                fill(p.tensor.data_mut());
            }
        }
        for layer in net.layers_mut() {
            for b in layer.buffers_mut() {
                fill(b.data_mut());
            }
        }
        for m in opt.m.iter_mut() {
            fill(m);
        }
        for v in opt.v.iter_mut() {
            fill(v);
        }
    }
    model.step = header.step;
    model.opt_g.step = header.adam_steps[0];
    model.opt_d.step = header.adam_steps[1];
    Ok(model)
}

pub fn save_checkpoint(model: &GanModel, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GanModel> {
    read_checkpoint(&fs::read(path)?)
}
