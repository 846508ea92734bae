//! Binary model files.
//!
//! Layout (little-endian):
//!
//! ```text
//! "FDMS"            4 bytes magic
//! version           u32 = 1
//! seed              u64
//! n_classes         u32
//! class codes       u32 x n_classes
//! layer count       u32   parameterized layers, each stored as weight then bias
//! per tensor:       rank u32, dims u32 x rank, f32 x prod(dims)
//! crc32             u32 over every preceding byte
//! ```
//!
//! Conv weights are rank 4 `[out, in, k, k]` (same padding), dense weights
//! rank 2 `[out, in]`. The layer list is rebuilt as conv/relu/pool blocks,
//! flatten, then dense layers with relu between them and softmax last; the
//! input is taken to be square.

use std::fs;
use std::path::Path;

use crate::error::{Error, Location, Result};
use crate::signal::FaultClass;

use super::model::{Model, Tensor};
use super::spec::{LayerSpec, ModelSpec};

pub const MAGIC: &[u8; 4] = b"FDMS";
pub const FORMAT_VERSION: u32 = 1;

const MAX_RANK: u32 = 4;

pub fn model_to_bytes(model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed().to_le_bytes());
    out.extend_from_slice(&(model.classes().len() as u32).to_le_bytes());
    for c in model.classes() {
        out.extend_from_slice(&c.code().to_le_bytes());
    }
    out.extend_from_slice(&((model.params().len() / 2) as u32).to_le_bytes());
    for t in model.params() {
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn save_model(model: &Model<f32>, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model<f32>> {
    model_from_bytes(&fs::read(path)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                Location::Offset(self.pos as u64),
                format!(
                    "truncated while reading {what} ({n} bytes needed, {} left)",
                    self.buf.len() - self.pos
                ),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    fn err(&self, at: usize, msg: impl Into<String>) -> Error {
        Error::format(Location::Offset(at as u64), msg)
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    // The trailing CRC is not part of the payload.
    if bytes.len() < 4 {
        return Err(Error::format(
            Location::Offset(0),
            "file too short for a model",
        ));
    }
    let body_len = bytes.len() - 4;
    let mut cur = Cursor {
        buf: &bytes[..body_len],
        pos: 0,
    };

    if cur.take(4, "magic")? != MAGIC {
        return Err(cur.err(0, "bad magic (expected \"FDMS\")"));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(cur.err(4, format!("unsupported format version {version}")));
    }
    let seed = cur.u64("seed")?;
    let n_at = cur.pos;
    let n_classes = cur.u32("class count")?;
    if !(2..=9).contains(&n_classes) {
        return Err(cur.err(n_at, format!("class count {n_classes} outside 2..9")));
    }
    let mut classes = Vec::with_capacity(n_classes as usize);
    for _ in 0..n_classes {
        let at = cur.pos;
        let code = cur.u32("class code")?;
        classes.push(
            FaultClass::from_code(code)
                .ok_or_else(|| cur.err(at, format!("unknown class code {code}")))?,
        );
    }
    let layers_at = cur.pos;
    let n_layers = cur.u32("layer count")?;
    if n_layers == 0 || n_layers > 16 {
        return Err(cur.err(layers_at, format!("implausible layer count {n_layers}")));
    }

    let mut params = Vec::with_capacity(2 * n_layers as usize);
    for _ in 0..2 * n_layers {
        let at = cur.pos;
        let rank = cur.u32("tensor rank")?;
        if rank == 0 || rank > MAX_RANK {
            return Err(cur.err(at, format!("tensor rank {rank} outside 1..{MAX_RANK}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(cur.u32("tensor dimension")? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c <= (body_len - cur.pos) / 4)
            .ok_or_else(|| {
                cur.err(
                    at,
                    format!("tensor of shape {shape:?} exceeds the remaining file"),
                )
            })?;
        let payload_at = cur.pos;
        let raw = cur.take(count * 4, "tensor payload")?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(cur.err(payload_at + 4 * i, "non-finite parameter"));
        }
        params.push(Tensor { values, shape });
    }
    if cur.pos != body_len {
        return Err(cur.err(
            cur.pos,
            format!("{} unexpected bytes before checksum", body_len - cur.pos),
        ));
    }
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(&bytes[..body_len]);
    if stored != actual {
        return Err(Error::format(
            Location::Offset(body_len as u64),
            format!("checksum mismatch (stored {stored:08x}, computed {actual:08x})"),
        ));
    }

    let spec = rebuild_spec(&params, classes)
        .map_err(|e| Error::format(Location::Offset(layers_at as u64), e.to_string()))?;
    Model::from_parts(spec, params, seed)
        .map_err(|e| Error::format(Location::Offset(layers_at as u64), e.to_string()))
}

fn rebuild_spec(params: &[Tensor<f32>], classes: Vec<FaultClass>) -> Result<ModelSpec> {
    let weights: Vec<&Tensor<f32>> = params.iter().step_by(2).collect();
    let n_conv = weights.iter().take_while(|w| w.shape.len() == 4).count();
    if n_conv == weights.len() || weights[n_conv..].iter().any(|w| w.shape.len() != 2) {
        return Err(Error::invalid(
            "layer sequence must be conv layers followed by dense layers",
        ));
    }
    let mut layers = Vec::new();
    for w in &weights[..n_conv] {
        let k = w.shape[2];
        if k % 2 == 0 || w.shape[3] != k {
            return Err(Error::invalid("conv kernels must be square and odd"));
        }
        layers.push(LayerSpec::Conv {
            out_channels: w.shape[0],
            kernel: k,
            padding: k / 2,
        });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::MaxPool { size: 2 });
    }
    layers.push(LayerSpec::Flatten);
    let dense = &weights[n_conv..];
    for (i, w) in dense.iter().enumerate() {
        layers.push(LayerSpec::Dense { units: w.shape[0] });
        if i + 1 < dense.len() {
            layers.push(LayerSpec::Relu);
        }
    }
    layers.push(LayerSpec::Softmax);

    let in_channels = if n_conv > 0 { weights[0].shape[1] } else { 1 };
    let (last_channels, flat) = if n_conv > 0 {
        (weights[n_conv - 1].shape[0], dense[0].shape[1])
    } else {
        (1, dense[0].shape[1])
    };
    let cells = flat / last_channels.max(1);
    let side_reduced = (cells as f64).sqrt().round() as usize;
    if side_reduced * side_reduced * last_channels != flat {
        return Err(Error::invalid(
            "cannot infer a square input from the first dense layer",
        ));
    }
    let side = side_reduced << n_conv;
    ModelSpec {
        input_shape: [in_channels, side, side],
        layers,
        classes,
    }
    .validated()
}

impl ModelSpec {
    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}
