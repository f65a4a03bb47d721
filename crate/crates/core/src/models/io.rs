//! Binary model files.
//!
//! Layout (little-endian): magic, format version `u16`, model kind `u8`,
//! `u32` header length and a JSON header, `u32` tensor count, then per tensor
//! a `u16`-prefixed name, `u8` rank, `u32` dims and `f64` values. A SHA-256
//! digest of everything before it closes the file.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::nn::{Shape, TrainHistory};
use super::{LinearModel, Model, ModelError, ModelKind, ModelSpec, Result, TrainConfig, TrainedModel};

pub const MAGIC: &[u8; 4] = b"SPLM";
pub const FORMAT_VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u16,
    kind: ModelKind,
    schema_id: String,
    spec: ModelSpec,
    train: TrainConfig,
    input: Shape,
    aux_width: usize,
    #[serde(default)]
    history: Option<TrainHistory>,
}

type Tensor = (String, Vec<usize>, Vec<f64>);

fn tensors_of(model: &Model) -> Vec<Tensor> {
    match &model.body {
        TrainedModel::Majority { p_deceptive } => vec![("p_deceptive".into(), vec![1], vec![*p_deceptive])],
        TrainedModel::Linear(m) => vec![
            ("weights".into(), vec![m.weights.len()], m.weights.clone()),
            ("bias".into(), vec![1], vec![m.bias]),
            ("calibration".into(), vec![2], vec![m.calibration.0, m.calibration.1]),
        ],
        TrainedModel::Neural(net) => net
            .layers
            .iter()
            .enumerate()
            .flat_map(|(i, layer)| {
                layer.params().into_iter().map(move |(name, dims, data)| (format!("layers.{i}.{name}"), dims, data.to_vec()))
            })
            .collect(),
    }
}

/// Serialize a model to bytes.
pub fn write_model(model: &Model) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        schema_id: model.schema_id.clone(),
        spec: model.spec.clone(),
        train: model.train.clone(),
        input: model.input,
        aux_width: model.aux_width,
        history: model.history.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(model.kind().code());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let tensors = tensors_of(model);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, data) in &tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            ModelError::Format(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parse a model from bytes.
pub fn read_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelError::Format("not a model file (bad magic)".into()));
    }
    if bytes.len() < MAGIC.len() + 2 {
        return Err(ModelError::Format("truncated before the version".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(ModelError::Version { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < MAGIC.len() + 2 + DIGEST_LEN {
        return Err(ModelError::Format("truncated file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(ModelError::Format("checksum mismatch (file truncated or corrupted)".into()));
    }
    let mut cur = Cursor { buf: body, pos: MAGIC.len() + 2 };
    let code = cur.u8()?;
    let header_len = cur.u32()? as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?)
        .map_err(|e| ModelError::Format(format!("header: {e}")))?;
    if header.kind.code() != code || header.spec.kind() != header.kind {
        return Err(ModelError::Format("model kind in header disagrees with the file".into()));
    }
    let n = cur.u32()? as usize;
    let mut tensors: Vec<Tensor> = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?;
        let rank = cur.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32()? as usize);
        }
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| {
            ModelError::Format(format!("tensor {name}: dims overflow"))
        })?;
        let raw = cur.take(len.checked_mul(8).ok_or_else(|| ModelError::Format("tensor too large".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push((name, dims, data));
    }
    if cur.pos != body.len() {
        return Err(ModelError::Format(format!("{} trailing bytes", body.len() - cur.pos)));
    }
    let body = restore_body(&header, tensors)?;
    Ok(Model {
        spec: header.spec,
        train: header.train,
        schema_id: header.schema_id,
        input: header.input,
        aux_width: header.aux_width,
        body,
        history: header.history,
    })
}

fn restore_body(header: &Header, tensors: Vec<Tensor>) -> Result<TrainedModel> {
    let find = |name: &str| {
        tensors
            .iter()
            .find(|t| t.0 == name)
            .map(|t| t.2.clone())
            .ok_or_else(|| ModelError::Format(format!("missing tensor {name}")))
    };
    match header.spec {
        ModelSpec::Majority => Ok(TrainedModel::Majority { p_deceptive: find("p_deceptive")?[0] }),
        ModelSpec::LogisticRegression | ModelSpec::LinearSvm => {
            let weights = find("weights")?;
            let bias = find("bias")?;
            let cal = find("calibration")?;
            if bias.len() != 1 || cal.len() != 2 {
                return Err(ModelError::Format("bad linear model tensors".into()));
            }
            Ok(TrainedModel::Linear(LinearModel { kind: header.kind, weights, bias: bias[0], calibration: (cal[0], cal[1]) }))
        }
        _ => {
            // rebuild the architecture, then overwrite every parameter
            let mut net = header.spec.build_network(header.input, header.aux_width, &mut ChaCha8Rng::seed_from_u64(0))?;
            let expected: Vec<(String, Vec<usize>)> = net
                .layers
                .iter()
                .enumerate()
                .flat_map(|(i, l)| l.params().into_iter().map(move |(n, d, _)| (format!("layers.{i}.{n}"), d)))
                .collect();
            if expected.len() != tensors.len() {
                return Err(ModelError::Format(format!("expected {} tensors, found {}", expected.len(), tensors.len())));
            }
            for (slot, ((name, dims), (t_name, t_dims, data))) in
                net.param_tensors_mut().into_iter().zip(expected.iter().zip(tensors))
            {
                if *name != t_name || *dims != t_dims {
                    return Err(ModelError::Format(format!("tensor {t_name} {t_dims:?} where {name} {dims:?} was expected")));
                }
                *slot = data;
            }
            Ok(TrainedModel::Neural(net))
        }
    }
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&write_model(model))?;
    f.sync_all()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Model {
        Model {
            spec: ModelSpec::LogisticRegression,
            train: TrainConfig::linear(),
            schema_id: "abc".into(),
            input: Shape::Sparse(3),
            aux_width: 0,
            body: TrainedModel::Linear(LinearModel {
                kind: ModelKind::LogisticRegression,
                weights: vec![0.1, -0.2, 0.3],
                bias: 0.5,
                calibration: (1.0, 0.0),
            }),
            history: None,
        }
    }

    #[test]
    fn round_trip() {
        let m = tiny();
        assert_eq!(read_model(&write_model(&m)).unwrap(), m);
    }

    #[test]
    fn version_checked_before_checksum() {
        let mut bytes = write_model(&tiny());
        bytes[4] = 99;
        assert!(matches!(read_model(&bytes), Err(ModelError::Version { found: 99, expected: 1 })));
    }

    #[test]
    fn truncation_and_corruption() {
        let bytes = write_model(&tiny());
        for cut in [0, 3, 5, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(read_model(&bytes[..cut]), Err(ModelError::Format(_))), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let mid = flipped.len() - 40;
        flipped[mid] ^= 1;
        assert!(matches!(read_model(&flipped), Err(ModelError::Format(_))));
    }
}
