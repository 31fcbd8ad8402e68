//! Self-describing binary checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! b"MRNNCKPT"  u32 version  u32 header_len  header_len bytes of JSON
//! per array:   u32 name_len  name  u32 rank  rank x u64 dims  f64 values (row-major)
//! ```
//!
//! The JSON header carries the format version, the model description and
//! the expected array names and shapes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::{MixtureSource, ModelDescription};
use crate::error::{Error, Result};
use crate::model::Model;

pub const MAGIC: &[u8; 8] = b"MRNNCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    description: ModelDescription,
    arrays: Vec<ArrayEntry>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: [usize; 2],
}

fn entries(model: &Model) -> Vec<ArrayEntry> {
    model
        .named_tensors()
        .into_iter()
        .map(|(name, t)| ArrayEntry {
            name,
            shape: [t.rows(), t.cols()],
        })
        .collect()
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    if !model.is_finite() {
        return Err(Error::CheckpointShape("model has non-finite parameters".into()));
    }
    let header = serde_json::to_vec(&Header {
        format_version: FORMAT_VERSION,
        description: model.description,
        arrays: entries(model),
    })?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (name, t) in model.named_tensors() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        for d in [t.rows(), t.cols()] {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::TruncatedCheckpoint);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() {
        return Err(if MAGIC.starts_with(bytes) {
            Error::TruncatedCheckpoint
        } else {
            Error::NotACheckpoint
        });
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::NotACheckpoint);
    }
    let mut r = Reader {
        bytes: &bytes[MAGIC.len()..],
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(header_len)?)
        .map_err(|e| Error::CheckpointShape(format!("unreadable header: {e}")))?;
    if header.format_version != version {
        return Err(Error::CheckpointShape("header and prefix disagree on the version".into()));
    }
    let mut model = Model::new(header.description, || 0.0)
        .map_err(|e| Error::CheckpointShape(format!("invalid description: {e}")))?;
    let expected = entries(&model);
    if header.arrays != expected {
        return Err(Error::CheckpointShape(
            "array table does not match the model description".into(),
        ));
    }
    for (entry, dst) in expected.iter().zip(model.tensors_mut()) {
        let name_len = r.u32()? as usize;
        let name = r.take(name_len)?;
        if name != entry.name.as_bytes() {
            return Err(Error::CheckpointShape(format!(
                "expected array `{}`, found `{}`",
                entry.name,
                String::from_utf8_lossy(name)
            )));
        }
        let rank = r.u32()?;
        let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<u64>>>()?;
        if dims != [entry.shape[0] as u64, entry.shape[1] as u64] {
            return Err(Error::CheckpointShape(format!(
                "array `{}` has dims {dims:?}, expected {:?}",
                entry.name, entry.shape
            )));
        }
        let raw = r.take(dst.len() * 8)?;
        for (v, chunk) in dst.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if !r.bytes.is_empty() {
        return Err(Error::CheckpointShape(format!("{} trailing bytes", r.bytes.len())));
    }
    check_loaded(&model)?;
    Ok(model)
}

fn check_loaded(model: &Model) -> Result<()> {
    if !model.is_finite() {
        return Err(Error::CheckpointShape("non-finite parameters".into()));
    }
    let factor = match &model.mixture {
        MixtureSource::Single(m) => &m.precision_factor,
        MixtureSource::Bucketed(b) => &b.precision_factor,
        MixtureSource::None => return Ok(()),
    };
    for r in 0..factor.rows() {
        for c in r + 1..factor.cols() {
            if factor.get(r, c) != 0.0 {
                return Err(Error::CheckpointShape("L is not lower triangular".into()));
            }
        }
    }
    Ok(())
}

pub fn emit_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{CellKind, MixtureDims};
    use crate::data::generate_synthetic;
    use crate::metrics::Metric;
    use crate::mixture::Similarity;
    use crate::model::{language_model_description, regression_description};
    use crate::train::{fit, init_params, TrainConfig, DEFAULT_INIT_RANGE};

    fn mixed(bucketed: bool, similarity: Similarity) -> Model {
        let desc = regression_description(
            CellKind::Lstm,
            6,
            1,
            Some(MixtureDims {
                m: 4,
                n: 3,
                buckets: 3,
                bucketed,
                similarity,
            }),
        );
        init_params(desc, 4, DEFAULT_INIT_RANGE).unwrap()
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        for model in [
            mixed(false, Similarity::Cosine),
            mixed(true, Similarity::Mahalanobis),
            init_params(
                language_model_description(CellKind::Gru, 5, 3, 11, None),
                1,
                DEFAULT_INIT_RANGE,
            )
            .unwrap(),
        ] {
            let bytes = encode(&model).unwrap();
            let back = decode(&bytes).unwrap();
            assert_eq!(back, model);
            assert_eq!(encode(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn trained_predictions_survive() {
        let data = generate_synthetic(24, 10).unwrap();
        let desc = mixed(true, Similarity::Cosine).description;
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let (model, _) = fit(desc, &data, &cfg, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        emit_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let a = model.evaluate(&data, Metric::Mae).unwrap();
        let b = loaded.evaluate(&data, Metric::Mae).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn distinct_errors() {
        let bytes = encode(&mixed(false, Similarity::Mahalanobis)).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode(&bad_magic), Err(Error::NotACheckpoint)));
        assert!(matches!(decode(b"hello"), Err(Error::NotACheckpoint)));

        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(matches!(
            decode(&bad_version),
            Err(Error::CheckpointVersion { found: 9, expected: 1 })
        ));

        for cut in [4, 10, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(Error::TruncatedCheckpoint)), "cut {cut}");
        }

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode(&extra), Err(Error::CheckpointShape(_))));

        // Header claims hidden 7 while the arrays are sized for hidden 6.
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let at = text.find("\"hidden\":6").unwrap();
        let mut wrong = bytes.clone();
        wrong[at + "\"hidden\":".len()] = b'7';
        assert!(matches!(decode(&wrong), Err(Error::CheckpointShape(_))));
    }
}
