//! Versioned model persistence.
//!
//! A model document records the format version, the hash of the vocabulary
//! the model was trained against, the float width, and every parameter matrix
//! row-major. Parameters are stored either as decimal numbers (exact for
//! 64-bit values under shortest-round-trip printing) or as base64 of the
//! little-endian 64-bit bytes; the flag travels with the document. Loaders
//! refuse mismatched formats, versions, vocabulary hashes, and float modes
//! instead of guessing.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{as_f64, real, Matrix, ParamSet, Scalar};

pub const MODEL_FORMAT: &str = "malgraph-model";
pub const MODEL_VERSION: u32 = 1;

/// How parameter arrays are written into the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamEncoding {
    #[default]
    Decimal,
    Base64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamData {
    Decimal(Vec<f64>),
    Base64(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: ParamData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    /// Which model this is ("vgae" or "snn").
    pub kind: String,
    pub vocab_hash: String,
    pub float_mode: String,
    pub encoding: ParamEncoding,
    pub params: Vec<ParamRecord>,
}

impl ModelDocument {
    pub fn from_params<T: Scalar>(
        kind: &str,
        vocab_hash: &str,
        encoding: ParamEncoding,
        params: &ParamSet<T>,
    ) -> Self {
        let records = params
            .iter()
            .map(|p| {
                let values: Vec<f64> = p.value.data().iter().map(|&x| as_f64(x)).collect();
                let data = match encoding {
                    ParamEncoding::Decimal => ParamData::Decimal(values),
                    ParamEncoding::Base64 => {
                        let mut bytes = Vec::with_capacity(values.len() * 8);
                        for v in &values {
                            bytes.extend_from_slice(&v.to_le_bytes());
                        }
                        ParamData::Base64(BASE64.encode(bytes))
                    }
                };
                ParamRecord { name: p.name.clone(), rows: p.value.rows(), cols: p.value.cols(), data }
            })
            .collect();
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kind: kind.to_string(),
            vocab_hash: vocab_hash.to_string(),
            float_mode: T::NAME.to_string(),
            encoding,
            params: records,
        }
    }

    /// Rebuild a parameter set, verifying format, version, kind, float mode,
    /// optional vocabulary hash, and the expected shape table.
    pub fn into_params<T: Scalar>(
        self,
        kind: &str,
        expected_vocab_hash: Option<&str>,
        expected_shapes: &[(&str, usize, usize)],
    ) -> Result<ParamSet<T>> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "expected format {MODEL_FORMAT}, found {}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {} (this build reads {MODEL_VERSION})",
                self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {kind} model, found {}", self.kind)));
        }
        if self.float_mode != T::NAME {
            return Err(Error::Format(format!(
                "model was saved in {} mode, run is in {} mode",
                self.float_mode,
                T::NAME
            )));
        }
        if let Some(expected) = expected_vocab_hash {
            if self.vocab_hash != expected {
                return Err(Error::Format(format!(
                    "vocabulary hash mismatch: model {}, current {expected}",
                    self.vocab_hash
                )));
            }
        }

        let by_name: BTreeMap<String, ParamRecord> =
            self.params.into_iter().map(|r| (r.name.clone(), r)).collect();
        let mut set = ParamSet::new();
        for &(name, rows, cols) in expected_shapes {
            let record = by_name
                .get(name)
                .ok_or_else(|| Error::Format(format!("model document lacks parameter {name}")))?;
            if record.rows != rows || record.cols != cols {
                return Err(Error::Format(format!(
                    "parameter {name} has shape {}x{}, expected {rows}x{cols}",
                    record.rows, record.cols
                )));
            }
            let values = decode_values(&record.data)?;
            if values.len() != rows * cols {
                return Err(Error::Format(format!(
                    "parameter {name} holds {} values, expected {}",
                    values.len(),
                    rows * cols
                )));
            }
            let data: Vec<T> = values.iter().map(|&v| real(v)).collect();
            set.insert(name, Matrix::from_vec(rows, cols, data)?)?;
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serialization cannot fail")
    }
}

fn decode_values(data: &ParamData) -> Result<Vec<f64>> {
    match data {
        ParamData::Decimal(values) => Ok(values.clone()),
        ParamData::Base64(text) => {
            let bytes = BASE64
                .decode(text)
                .map_err(|e| Error::Format(format!("invalid base64 parameter data: {e}")))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Format("base64 parameter data is not 8-byte aligned".into()));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk size is 8")))
                .collect())
        }
    }
}

/// Read a model document from disk.
pub fn load_model_document(path: &Path) -> Result<ModelDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        detail: e.to_string(),
    })
}
