//! Prepared-dataset container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"STALLDS\0"        8 bytes
//! format version      u32
//! manifest length     u64
//! manifest            JSON, UTF-8
//! per split, in manifest order:
//!   windows           n * features * window_len f64, each window row-major (feature, time)
//!   labels            n f64 (0.0 or 1.0)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::flight::CHANNELS;
use super::split::SplitCounts;
use super::standardize::Standardizer;
use super::window::{Dataset, Provenance, WindowedSample};
use crate::error::{Error, Result};
use crate::nn::Matrix;

const MAGIC: &[u8; 8] = b"STALLDS\0";
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// How much of the windowed corpus survived balancing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retention {
    pub recordings: usize,
    pub timesteps: usize,
    pub windows: usize,
    pub positive_windows: usize,
    pub negative_windows: usize,
    /// Label-0 windows dropped because a warning is already inside them.
    pub contaminated_negatives: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub warning_in_window: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub samples: usize,
    pub positives: usize,
    pub negatives: usize,
    pub provenance: Vec<SampleMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub features: usize,
    pub window_len: usize,
    pub horizon: usize,
    pub columns: Vec<String>,
    pub counts: SplitCounts,
    pub segment_exclusive: bool,
    pub standardizer: Standardizer,
    pub retention: Retention,
    pub splits: Vec<SplitManifest>,
}

/// Standardized train/validation/test sets plus everything needed to
/// reproduce or apply them.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub seed: u64,
    pub window_len: usize,
    pub horizon: usize,
    pub counts: SplitCounts,
    pub segment_exclusive: bool,
    pub standardizer: Standardizer,
    pub retention: Retention,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl PreparedDataset {
    pub fn split(&self, name: &str) -> Option<&Dataset> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let features = self.standardizer.features();
        let splits = [("train", &self.train), ("val", &self.val), ("test", &self.test)];
        let manifest = Manifest {
            format_version: DATASET_FORMAT_VERSION,
            seed: self.seed,
            features,
            window_len: self.window_len,
            horizon: self.horizon,
            columns: CHANNELS.iter().map(|c| c.to_string()).collect(),
            counts: self.counts,
            segment_exclusive: self.segment_exclusive,
            standardizer: self.standardizer.clone(),
            retention: self.retention.clone(),
            splits: splits
                .iter()
                .map(|(name, ds)| SplitManifest {
                    name: name.to_string(),
                    samples: ds.len(),
                    positives: ds.positives(),
                    negatives: ds.negatives(),
                    provenance: ds
                        .samples
                        .iter()
                        .map(|s| SampleMeta {
                            provenance: s.provenance.clone(),
                            warning_in_window: s.warning_in_window,
                        })
                        .collect(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&DATASET_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, ds) in splits {
            for s in &ds.samples {
                if s.x.shape() != (features, self.window_len) {
                    return Err(Error::invalid("sample shape differs from the dataset geometry"));
                }
                for v in s.x.as_slice() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            for s in &ds.samples {
                out.extend_from_slice(&f64::from(s.label).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Format("not a prepared dataset file".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap()) as usize;
        let manifest: Manifest = serde_json::from_slice(cur.take(len)?)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        let cells = manifest.features * manifest.window_len;
        let mut sets = Vec::new();
        for split in &manifest.splits {
            if split.provenance.len() != split.samples {
                return Err(Error::Format(format!("split `{}`: provenance incomplete", split.name)));
            }
            let mut xs = Vec::with_capacity(split.samples);
            for _ in 0..split.samples {
                let data = cur.f64s(cells)?;
                xs.push(Matrix::from_vec(manifest.features, manifest.window_len, data)?);
            }
            let labels = cur.f64s(split.samples)?;
            let samples = xs
                .into_iter()
                .zip(labels)
                .zip(&split.provenance)
                .map(|((x, label), meta)| {
                    let label = match label {
                        l if l == 0.0 => 0,
                        l if l == 1.0 => 1,
                        other => {
                            return Err(Error::Format(format!("label {other} is not 0 or 1")))
                        }
                    };
                    Ok(WindowedSample {
                        x,
                        label,
                        warning_in_window: meta.warning_in_window,
                        provenance: meta.provenance.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            sets.push((split.name.clone(), Dataset::new(samples)));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after the last block".into()));
        }
        let mut take = |name: &str| -> Result<Dataset> {
            let i = sets
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| Error::Format(format!("split `{name}` missing")))?;
            Ok(sets.remove(i).1)
        };
        Ok(PreparedDataset {
            train: take("train")?,
            val: take("val")?,
            test: take("test")?,
            seed: manifest.seed,
            window_len: manifest.window_len,
            horizon: manifest.horizon,
            counts: manifest.counts,
            segment_exclusive: manifest.segment_exclusive,
            standardizer: manifest.standardizer,
            retention: manifest.retention,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("file is truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("block too large".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PreparedDataset {
        let mk = |label: u8, i: usize| WindowedSample {
            x: Matrix::from_fn(2, 3, |f, t| (i * 10 + f * 3 + t) as f64 * 0.5),
            label,
            warning_in_window: i % 2 == 0,
            provenance: Provenance {
                source: format!("f{i}"),
                start: i,
                end: i + 2,
                label_index: i + 4,
            },
        };
        PreparedDataset {
            seed: 4,
            window_len: 3,
            horizon: 2,
            counts: SplitCounts {
                train_pos: 1,
                train_neg: 1,
                val_each: 1,
                test_each: 0,
            },
            segment_exclusive: true,
            standardizer: Standardizer::identity(2),
            retention: Retention::default(),
            train: Dataset::new(vec![mk(1, 0), mk(0, 1)]),
            val: Dataset::new(vec![mk(0, 2), mk(1, 3)]),
            test: Dataset::default(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let d = tiny();
        let back = PreparedDataset::from_bytes(&d.to_bytes().unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn truncation_and_version_are_detected() {
        let bytes = tiny().to_bytes().unwrap();
        assert!(matches!(
            PreparedDataset::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
        let mut v = bytes.clone();
        v[8] = 99;
        assert!(matches!(
            PreparedDataset::from_bytes(&v),
            Err(Error::Version { found: 99, .. })
        ));
    }
}
