//! Versioned model files.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! b"STALLMDL"         8 bytes
//! format version      u32
//! header length       u64
//! header              JSON: spec, standardizer, seed, tensor names and shapes
//! payload length      u64
//! payload             every tensor's f64 values, row-major, in header order
//! checksum            SHA-256 of all preceding bytes, 32 bytes
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::prepared::Cursor;
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::nn::{Matrix, Model, ModelSpec};

const MAGIC: &[u8; 8] = b"STALLMDL";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub spec: ModelSpec,
    pub standardizer: Standardizer,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

pub fn model_to_bytes(m: &Model, s: &Standardizer) -> Result<Vec<u8>> {
    if s.features() != m.spec().input_features {
        return Err(Error::invalid(format!(
            "standardizer has {} features, model expects {}",
            s.features(),
            m.spec().input_features
        )));
    }
    let tensors = m.tensors();
    let header = ModelHeader {
        spec: m.spec().clone(),
        standardizer: s.clone(),
        seed: m.rng_seed(),
        tensors: m
            .tensor_names()
            .into_iter()
            .zip(&tensors)
            .map(|(name, t)| TensorEntry {
                name,
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let payload_len: usize = tensors.iter().map(|t| t.len() * 8).sum();
    let mut out = Vec::with_capacity(28 + json.len() + payload_len + CHECKSUM_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(payload_len as u64).to_le_bytes());
    for t in &tensors {
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Checks, in order: magic, version, length (truncation), checksum, then
/// that the header and payload agree with the spec.
pub fn model_from_bytes(bytes: &[u8]) -> Result<(Model, Standardizer)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let header_bytes = cur.take(header_len)?;
    let payload_len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
    let payload = cur.take(payload_len)?;
    let body_end = cur.pos;
    let stored = cur.take(CHECKSUM_LEN)?;
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after the checksum".into()));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
        return Err(Error::Corrupt);
    }

    let header: ModelHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    header.spec.validate()?;
    let expected = header.spec.param_count();
    let declared: usize = header.tensors.iter().map(|t| t.rows * t.cols).sum();
    if declared != expected || payload_len != expected * 8 {
        return Err(Error::Format(format!(
            "payload holds {} values, spec needs {expected}",
            payload_len / 8
        )));
    }
    let mut values = Cursor {
        bytes: payload,
        pos: 0,
    };
    let tensors = header
        .tensors
        .iter()
        .map(|t| Matrix::from_vec(t.rows, t.cols, values.f64s(t.rows * t.cols)?))
        .collect::<Result<Vec<_>>>()?;
    let model = Model::from_tensors(header.spec, header.seed, tensors)?;
    let names = model.tensor_names();
    if let Some((want, got)) = names
        .iter()
        .zip(&header.tensors)
        .find(|(want, got)| **want != got.name)
    {
        return Err(Error::Format(format!(
            "tensor `{}` where `{want}` was expected",
            got.name
        )));
    }
    if header.standardizer.features() != model.spec().input_features {
        return Err(Error::Format("standardizer width does not match the spec".into()));
    }
    Ok((model, header.standardizer))
}

pub fn save_model(m: &Model, s: &Standardizer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(m, s)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, Standardizer)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> (Model, Standardizer) {
        let spec = ModelSpec::new(vec![
            LayerSpec::bilstm(5),
            LayerSpec::lstm(4),
            LayerSpec::dense(6),
            LayerSpec::dropout(0.5),
            LayerSpec::OutputSigmoid,
        ])
        .with_input(3, 7);
        let mut s = Standardizer::identity(3);
        s.mean = vec![0.1, -2.5, 1e-300];
        s.std = vec![0.3, 7.0, 1.0 / 3.0];
        (Model::new(spec, 21).unwrap(), s)
    }

    fn windows(n: usize) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        (0..n)
            .map(|_| Matrix::from_fn(3, 7, |_, _| rng.random_range(-3.0..3.0)))
            .collect()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let (m, s) = model();
        let bytes = model_to_bytes(&m, &s).unwrap();
        let (back, s2) = model_from_bytes(&bytes).unwrap();
        assert_eq!(s2, s);
        assert_eq!(back.spec(), m.spec());
        assert_eq!(back.tensors(), m.tensors());
        let w = windows(100);
        let refs: Vec<&Matrix> = w.iter().collect();
        assert_eq!(back.predict_batch(&refs).unwrap(), m.predict_batch(&refs).unwrap());
        assert_eq!(model_to_bytes(&back, &s2).unwrap(), bytes);
    }

    #[test]
    fn any_flipped_payload_byte_is_corrupt() {
        let (m, s) = model();
        let bytes = model_to_bytes(&m, &s).unwrap();
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let payload_start = 20 + header_len + 8;
        for offset in [payload_start, payload_start + 77, bytes.len() - 33] {
            let mut bad = bytes.clone();
            bad[offset] ^= 0x01;
            assert!(matches!(model_from_bytes(&bad), Err(Error::Corrupt)), "offset {offset}");
        }
    }

    #[test]
    fn unknown_version_and_truncation() {
        let (m, s) = model();
        let bytes = model_to_bytes(&m, &s).unwrap();
        let mut v = bytes.clone();
        v[8..12].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            model_from_bytes(&v),
            Err(Error::Version { found: 99, expected: 1 })
        ));
        for cut in [3, 15, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(model_from_bytes(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(model_from_bytes(&magic), Err(Error::Format(_))));
    }

    #[test]
    fn save_and_load_through_the_filesystem() {
        let (m, s) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.stallmdl");
        save_model(&m, &s, &path).unwrap();
        let (back, _) = load_model(&path).unwrap();
        assert_eq!(back.tensors(), m.tensors());
        assert!(matches!(load_model(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn mismatched_standardizer_is_rejected() {
        let (m, _) = model();
        assert!(model_to_bytes(&m, &Standardizer::identity(16)).is_err());
    }
}
