//! `GNNW1` weights files.
//!
//! ```text
//! "GNNW1"                        5 bytes
//! arch                           u8 (0 = gcn, 1 = gat)
//! in_dim, hidden_dim,
//! num_classes, heads_layer1      u32 each
//! dropout_rate, leaky_slope      f64 each
//! activation                     u8 (0 = relu, 1 = elu)
//! seed                           u64
//! num_arrays                     u32
//! per array: rows u32, cols u32, rows·cols f32 (row-major)
//! ```
//!
//! Array order: GCN `W1, b1, W2, b2`; GAT `W1, att_src1, att_dst1, b1,
//! W2, att_src2, att_dst2, b2`. Integers and floats are little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{init_params, Arch, HiddenActivation, Model, ModelConfig, ModelParams};
use crate::numerics::matrix::Matrix;
use crate::scalar::Scalar;

pub const WEIGHTS_MAGIC: &[u8; 5] = b"GNNW1";

pub fn encode_weights<T: Scalar>(params: &ModelParams<T>, config: &ModelConfig) -> Result<Vec<u8>> {
    if params.arch() != config.arch {
        return Err(Error::ArchMismatch { expected: config.arch.to_string(), found: params.arch().to_string() });
    }
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.push(match config.arch {
        Arch::Gcn => 0,
        Arch::Gat => 1,
    });
    for v in [config.in_dim, config.hidden_dim, config.num_classes, config.heads_layer1] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&config.dropout_rate.to_le_bytes());
    out.extend_from_slice(&config.leaky_slope.to_le_bytes());
    out.push(match config.activation {
        HiddenActivation::Relu => 0,
        HiddenActivation::Elu => 1,
    });
    out.extend_from_slice(&config.seed.to_le_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for &x in t.data() {
            out.extend_from_slice(&x.as_f32().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_weights<T: Scalar>(params: &ModelParams<T>, config: &ModelConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_weights(params, config)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated { offset: self.pos, needed: n - (self.buf.len() - self.pos), what });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &'static str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode_weights<T: Scalar>(buf: &[u8]) -> Result<(ModelParams<T>, ModelConfig)> {
    if buf.len() < WEIGHTS_MAGIC.len() || &buf[..WEIGHTS_MAGIC.len()] != WEIGHTS_MAGIC {
        return Err(Error::BadMagic { expected: "GNNW1" });
    }
    let mut c = Cursor { buf, pos: WEIGHTS_MAGIC.len() };
    let arch = match c.u8("arch tag")? {
        0 => Arch::Gcn,
        1 => Arch::Gat,
        t => return Err(Error::Malformed { offset: c.pos - 1, reason: format!("unknown arch tag {t}") }),
    };
    let in_dim = c.u32("config")? as usize;
    let hidden_dim = c.u32("config")? as usize;
    let num_classes = c.u32("config")? as usize;
    let heads_layer1 = c.u32("config")? as usize;
    let dropout_rate = c.f64("config")?;
    let leaky_slope = c.f64("config")?;
    let activation = match c.u8("config")? {
        0 => HiddenActivation::Relu,
        1 => HiddenActivation::Elu,
        t => return Err(Error::Malformed { offset: c.pos - 1, reason: format!("unknown activation tag {t}") }),
    };
    let seed = c.u64("config")?;
    let config = ModelConfig { arch, in_dim, hidden_dim, num_classes, heads_layer1, dropout_rate, leaky_slope, activation, seed };
    config.validate()?;

    // the freshly initialized params supply the expected shapes
    let mut params = init_params::<T>(&config)?;
    let count = c.u32("array count")? as usize;
    let expected = params.tensors().len();
    if count != expected {
        return Err(Error::ShapeMismatch(format!("{count} arrays in file, {arch} needs {expected}")));
    }
    for (k, t) in params.tensors_mut().into_iter().enumerate() {
        let rows = c.u32("array header")? as usize;
        let cols = c.u32("array header")? as usize;
        if (rows, cols) != t.shape() {
            return Err(Error::ShapeMismatch(format!("array {k}: file has {rows}x{cols}, config implies {:?}", t.shape())));
        }
        let raw = c.take(rows * cols * 4, "array data")?;
        let data: Vec<T> = raw.chunks_exact(4).map(|b| T::of_f32(f32::from_le_bytes(b.try_into().unwrap()))).collect();
        *t = Matrix::from_vec(rows, cols, data)?;
    }
    if c.pos != buf.len() {
        return Err(Error::Malformed { offset: c.pos, reason: format!("{} trailing bytes", buf.len() - c.pos) });
    }
    if !params.is_finite() {
        return Err(Error::Malformed { offset: 0, reason: "non-finite weight".into() });
    }
    Ok((params, config))
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelParams<T>, ModelConfig)> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&buf)
}

/// Loads a weights file and fails with `arch-mismatch` unless it holds `arch`.
pub fn load_weights_expecting<T: Scalar>(path: impl AsRef<Path>, arch: Arch) -> Result<(ModelParams<T>, ModelConfig)> {
    let (params, config) = load_weights(path)?;
    if config.arch != arch {
        return Err(Error::ArchMismatch { expected: arch.to_string(), found: config.arch.to_string() });
    }
    Ok((params, config))
}

impl<T: Scalar> Model<T> {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_weights(&self.params, &self.config, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (params, config) = load_weights(path)?;
        Ok(Self { config, params })
    }
}
