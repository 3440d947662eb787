//! Binary checkpoint format (little-endian):
//!
//! | field | type |
//! |---|---|
//! | magic | `b"QANT"` |
//! | version | u32 |
//! | layers L, hidden H, input m, output | 4 × u32 |
//! | per layer: skip flag, activation code | 2 × u8 |
//! | input scaler present | u8, then `m` means and `m` scales as f64 |
//! | per layer: weights (row-major), bias | f64 arrays |
//!
//! Metadata (seed, epoch, problem type) lives in a TOML sidecar next to the
//! checkpoint, `<file>.meta.toml`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::arch::{Activation, LayerSpec};
use super::mlp::{InputScaler, Layer, MlpParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QANT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
    pub problem_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Adjacency text of the QUBO mask, for QUBO-emitting models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
}

impl CheckpointMeta {
    pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
        let mut s = checkpoint.as_os_str().to_owned();
        s.push(".meta.toml");
        PathBuf::from(s)
    }

    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        let path = Self::sidecar_path(checkpoint);
        let text = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(checkpoint: &Path) -> Result<Self> {
        let path = Self::sidecar_path(checkpoint);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn write_checkpoint<T: Scalar>(params: &MlpParams<T>) -> Vec<u8> {
    let specs = params.specs();
    let hidden = if specs.len() > 1 { specs[0].out_dim } else { 0 };
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        CHECKPOINT_VERSION,
        specs.len() as u32,
        hidden as u32,
        params.input_dim() as u32,
        params.output_dim() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in specs {
        out.push(s.takes_skip as u8);
        out.push(s.activation.code());
    }
    let put = |out: &mut Vec<u8>, xs: &[T]| {
        for x in xs {
            out.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
        }
    };
    match params.scaler() {
        Some(sc) => {
            out.push(1);
            put(&mut out, &sc.mean);
            put(&mut out, &sc.scale);
        }
        None => out.push(0),
    }
    for l in params.layers() {
        put(&mut out, &l.weights);
        put(&mut out, &l.bias);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Parse(format!(
                "checkpoint truncated at byte {} (need {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Parse("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<MlpParams<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Parse("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let num_layers = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let input_dim = r.u32()? as usize;
    let output_dim = r.u32()? as usize;
    if num_layers == 0 {
        return Err(Error::Parse("checkpoint has no layers".into()));
    }
    let mut specs = Vec::with_capacity(num_layers);
    let mut prev = input_dim;
    for l in 0..num_layers {
        let takes_skip = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("bad skip flag {other}"))),
        };
        let activation = Activation::from_code(r.u8()?)
            .ok_or_else(|| Error::Parse("bad activation code".into()))?;
        let out_dim = if l + 1 == num_layers { output_dim } else { hidden };
        let in_dim = prev + if takes_skip { input_dim } else { 0 };
        specs.push(LayerSpec {
            in_dim,
            out_dim,
            activation,
            takes_skip,
        });
        prev = out_dim;
    }
    let scaler = match r.u8()? {
        0 => None,
        1 => Some(InputScaler {
            mean: r.f64s(input_dim)?,
            scale: r.f64s(input_dim)?,
        }),
        other => return Err(Error::Parse(format!("bad scaler flag {other}"))),
    };
    let mut layers = Vec::with_capacity(num_layers);
    for s in &specs {
        layers.push(Layer {
            weights: r.f64s(s.in_dim * s.out_dim)?,
            bias: r.f64s(s.out_dim)?,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    MlpParams::from_layers(input_dim, specs, layers, scaler)
        .map_err(|e| Error::Parse(format!("inconsistent checkpoint: {e}")))
}

pub fn save_checkpoint<T: Scalar>(params: &MlpParams<T>, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<MlpParams<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::build_arch;
    use crate::rng;

    fn net(l: usize) -> MlpParams<f64> {
        let mut r = rng::from_seed(5);
        MlpParams::glorot(4, build_arch(4, 3, l, 6).unwrap(), &mut r)
            .unwrap()
            .with_scaler(InputScaler { mean: vec![0.1; 4], scale: vec![2.0; 4] })
            .unwrap()
    }

    #[test]
    fn round_trip_bitwise() {
        let p = net(5);
        let back: MlpParams<f64> = read_checkpoint(&write_checkpoint(&p)).unwrap();
        assert_eq!(back, p);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qant");
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), p);
        let meta = CheckpointMeta { seed: 3, epoch: 7, problem_type: "randgraph".into(), ..Default::default() };
        meta.save(&path).unwrap();
        assert_eq!(CheckpointMeta::load(&path).unwrap(), meta);
    }

    #[test]
    fn truncated_and_corrupt() {
        let bytes = write_checkpoint(&net(3));
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_checkpoint::<f64>(&bytes[..cut]), Err(Error::Parse(_))));
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint::<f64>(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(read_checkpoint::<f64>(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(read_checkpoint::<f64>(&long).is_err());
    }

    #[test]
    fn wrong_depth_is_shape_error() {
        let p: MlpParams<f64> = read_checkpoint(&write_checkpoint(&net(3))).unwrap();
        let five = build_arch(4, 3, 5, 6).unwrap();
        assert!(matches!(p.check_arch(4, &five), Err(Error::Shape(_))));
    }
}
