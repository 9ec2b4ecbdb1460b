//! Checkpoint layout: the magic bytes `OBNN1\n`, a little-endian u64 header
//! length, a UTF-8 JSON header, then every weight, bias, BN gamma and BN beta
//! as little-endian f64 in layer order. Topology, BN running statistics and
//! caller metadata live in the header.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BatchNorm, DenseLayer, LayerSpec, Network, Tensor};
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"OBNN1\n";

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    spec: LayerSpec,
    running_mean: Option<Vec<f64>>,
    running_var: Option<Vec<f64>>,
    momentum: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetHeader {
    name: String,
    layers: Vec<LayerHeader>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    networks: Vec<NetHeader>,
    meta: serde_json::Value,
}

/// Serialises named networks plus free-form metadata.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    nets: &[(&str, &Network)],
    meta: &serde_json::Value,
) -> Result<()> {
    let mut payload: Vec<u8> = Vec::new();
    let mut headers = Vec::new();
    for (name, net) in nets {
        let mut layers = Vec::new();
        for l in &net.layers {
            let mut push = |xs: &[f64]| {
                for x in xs {
                    payload.extend_from_slice(&x.to_le_bytes());
                }
            };
            push(l.weights.data());
            push(&l.bias);
            if let Some(bn) = &l.bn {
                push(&bn.gamma);
                push(&bn.beta);
            }
            layers.push(LayerHeader {
                spec: l.spec,
                running_mean: l.bn.as_ref().map(|b| b.running_mean.clone()),
                running_var: l.bn.as_ref().map(|b| b.running_var.clone()),
                momentum: l.bn.as_ref().map(|b| b.momentum),
                epsilon: l.bn.as_ref().map(|b| b.epsilon),
            });
        }
        headers.push(NetHeader {
            name: name.to_string(),
            layers,
        });
    }
    let header = serde_json::to_vec(&Header {
        format: "onebit-nn".into(),
        networks: headers,
        meta: meta.clone(),
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&payload)?;
    Ok(())
}

/// Inverse of [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Vec<(String, Network)>, serde_json::Value)> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut hbuf = vec![0u8; len];
    r.read_exact(&mut hbuf)?;
    let header: Header = serde_json::from_slice(&hbuf)?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 {
        return Err(Error::Checkpoint("payload is not a whole number of f64".into()));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut pos = 0;
    let mut take = |n: usize| -> Result<Vec<f64>> {
        if pos + n > values.len() {
            return Err(Error::Checkpoint("payload too short".into()));
        }
        let v = values[pos..pos + n].to_vec();
        pos += n;
        Ok(v)
    };
    let mut nets = Vec::new();
    for nh in header.networks {
        let mut layers = Vec::new();
        for lh in nh.layers {
            let s = lh.spec;
            let w = Tensor::from_vec(s.outputs, s.inputs, take(s.outputs * s.inputs)?)?;
            let b = take(s.outputs)?;
            let mut layer = DenseLayer::new(s, w, b)?;
            if s.batch_norm {
                let missing = || Error::Checkpoint("batch norm statistics missing".into());
                layer.bn = Some(BatchNorm {
                    gamma: take(s.outputs)?,
                    beta: take(s.outputs)?,
                    running_mean: lh.running_mean.ok_or_else(missing)?,
                    running_var: lh.running_var.ok_or_else(missing)?,
                    momentum: lh.momentum.ok_or_else(missing)?,
                    epsilon: lh.epsilon.ok_or_else(missing)?,
                });
            }
            layers.push(layer);
        }
        nets.push((nh.name, Network::from_layers(layers)?));
    }
    if pos != values.len() {
        return Err(Error::Checkpoint("trailing payload".into()));
    }
    Ok((nets, header.meta))
}

pub fn save_checkpoint(
    path: &Path,
    nets: &[(&str, &Network)],
    meta: &serde_json::Value,
) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(f, nets, meta)
}

pub fn load_checkpoint(path: &Path) -> Result<(Vec<(String, Network)>, serde_json::Value)> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
