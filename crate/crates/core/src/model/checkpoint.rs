//! Checkpoint layout, integers little-endian:
//!
//! ```text
//! magic "DCNETCKP" | version u32 | config digest [u8; 32]
//! config_len u32 | config JSON (layer list, input shape, classes)
//! n_labels u32 | n_labels x (len u32, utf-8 bytes)
//! n_tensors u32 | n_tensors x (rank u32 | rank x u32 extents | f64 data)
//! ```
//!
//! Tensors are weights then bias for each layer in declaration order. The
//! digest is SHA-256 of the config JSON and is checked on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::weight_shapes;
use super::{LayerParams, ModelParams, NetworkConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DCNETCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub label_names: Vec<String>,
    pub params: ModelParams,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut writer: W) -> Result<()> {
    let json = serde_json::to_vec(&ckpt.config).expect("config serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&ckpt.config.digest());
    put_u32(&mut out, json.len());
    out.extend_from_slice(&json);
    put_u32(&mut out, ckpt.label_names.len());
    for name in &ckpt.label_names {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
    }
    let tensors: Vec<&Tensor> = ckpt.params.tensors().collect();
    put_u32(&mut out, tensors.len());
    for t in tensors {
        put_u32(&mut out, t.rank());
        for &e in t.shape() {
            put_u32(&mut out, e);
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    writer
        .write_all(&out)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io("<checkpoint>", e))
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.0.len() {
            return Err(Error::format("checkpoint is truncated"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn count(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<checkpoint>", e))?;
    let mut r = Reader(&bytes);
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let version = r.count()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
    let json_len = r.count()?;
    let config: NetworkConfig = serde_json::from_slice(r.take(json_len)?)
        .map_err(|e| Error::format(format!("checkpoint config: {e}")))?;
    if config.digest() != digest {
        return Err(Error::DigestMismatch(
            "stored config digest does not match the stored layer list".into(),
        ));
    }
    let n_labels = r.count()?;
    let mut label_names = Vec::new();
    for _ in 0..n_labels {
        let len = r.count()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format("label name is not utf-8"))?;
        label_names.push(name.to_owned());
    }
    let expected = weight_shapes(&config)?;
    let n_tensors = r.count()?;
    if n_tensors != 2 * expected.len() {
        return Err(Error::format(format!(
            "checkpoint holds {n_tensors} tensors, config needs {}",
            2 * expected.len()
        )));
    }
    let read_tensor = |r: &mut Reader| -> Result<Tensor> {
        let rank = r.count()?;
        let shape = (0..rank).map(|_| r.count()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = r
            .take(n.checked_mul(8).ok_or_else(|| Error::format("tensor too large"))?)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Tensor::from_vec(&shape, data)
    };
    let mut layers = Vec::with_capacity(expected.len());
    for (i, (w_shape, units)) in expected.iter().enumerate() {
        let weights = read_tensor(&mut r)?;
        let bias = read_tensor(&mut r)?;
        if weights.shape() != &w_shape[..] || bias.shape() != [*units] {
            return Err(Error::format(format!(
                "layer {i}: stored tensors {:?}/{:?} do not match the config",
                weights.shape(),
                bias.shape()
            )));
        }
        layers.push(LayerParams { weights, bias });
    }
    if !r.0.is_empty() {
        return Err(Error::format("trailing bytes after checkpoint"));
    }
    Ok(Checkpoint {
        config,
        label_names,
        params: ModelParams::from_layers(layers)?,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(ckpt, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
