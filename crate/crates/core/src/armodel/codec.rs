//! `NARUv1` model container.
//!
//! ```text
//! "NARUv1" | u64 LE metadata length | metadata JSON | tensors as f64 LE
//! ```
//!
//! The metadata carries the model config, the column dictionaries with
//! their hash, the training flags and the tensor list in storage order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AutoregressiveModel, ModelConfig, TensorSpec};
use crate::error::{Error, Result};
use crate::tabular::{Column, Dtype, Table, TableMeta, Value};

pub const MAGIC: &[u8; 6] = b"NARUv1";

#[derive(Serialize, Deserialize)]
struct Metadata {
    config: ModelConfig,
    columns: Vec<ColumnMeta>,
    row_count: u64,
    dictionary_hash: String,
    wildcard_trained: bool,
    tensors: Vec<TensorSpec>,
}

#[derive(Serialize, Deserialize)]
struct ColumnMeta {
    name: String,
    dtype: Dtype,
    domain: Vec<String>,
}

pub fn serialize(model: &AutoregressiveModel) -> Vec<u8> {
    let meta = Metadata {
        config: model.config.clone(),
        columns: model
            .meta
            .columns
            .iter()
            .map(|c| ColumnMeta {
                name: c.name().to_string(),
                dtype: c.dtype(),
                domain: c.domain().iter().map(Value::to_string).collect(),
            })
            .collect(),
        row_count: model.meta.row_count,
        dictionary_hash: model.meta.dictionary_hash(),
        wildcard_trained: model.wildcard_trained,
        tensors: model.layout.tensors.clone(),
    };
    let json = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 8 + json.len() + model.params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<AutoregressiveModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic);
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 8 {
        return Err(Error::SizeMismatch {
            expected: 8,
            found: rest.len(),
        });
    }
    let json_len = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    let rest = &rest[8..];
    if rest.len() < json_len {
        return Err(Error::SizeMismatch {
            expected: json_len,
            found: rest.len(),
        });
    }
    let meta: Metadata = serde_json::from_slice(&rest[..json_len]).map_err(|e| Error::Metadata(e.to_string()))?;
    let data = &rest[json_len..];

    let columns = meta
        .columns
        .iter()
        .map(|c| {
            let domain = c
                .domain
                .iter()
                .map(|raw| Value::parse(raw, c.dtype))
                .collect::<Result<Vec<_>>>()?;
            Column::new(c.name.clone(), c.dtype, domain)
        })
        .collect::<Result<Vec<_>>>()?;
    let table_meta = TableMeta {
        columns,
        row_count: meta.row_count,
    };
    let actual = table_meta.dictionary_hash();
    if actual != meta.dictionary_hash {
        return Err(Error::HashMismatch {
            model: meta.dictionary_hash,
            table: actual,
        });
    }

    meta.config
        .validate(table_meta.columns.len())
        .map_err(|e| Error::Metadata(e.to_string()))?;
    if meta.config.ordering.len() != table_meta.columns.len() {
        return Err(Error::Metadata("ordering does not cover every column".into()));
    }
    let expected_tensors = super::layout::Layout::new(&meta.config, &table_meta.domain_sizes(), &meta.config.ordering).tensors;
    let same = expected_tensors.len() == meta.tensors.len()
        && expected_tensors
            .iter()
            .zip(&meta.tensors)
            .all(|(a, b)| a.name == b.name && a.shape == b.shape);
    if !same {
        return Err(Error::Metadata("tensor list does not match the config".into()));
    }
    let n_params: usize = meta.tensors.iter().map(TensorSpec::numel).sum();
    if data.len() != n_params * 8 {
        return Err(Error::SizeMismatch {
            expected: n_params * 8,
            found: data.len(),
        });
    }
    let params = data
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    AutoregressiveModel::from_parts(meta.config, table_meta, params, meta.wildcard_trained)
}

/// Deserializes and checks that the model was built on `table`'s dictionaries.
pub fn deserialize_for(bytes: &[u8], table: &Table) -> Result<AutoregressiveModel> {
    let model = deserialize(bytes)?;
    let (m, t) = (model.meta.dictionary_hash(), table.dictionary_hash());
    if m != t {
        return Err(Error::HashMismatch { model: m, table: t });
    }
    Ok(model)
}

pub fn load(path: impl AsRef<Path>) -> Result<AutoregressiveModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize(&bytes)
}

impl AutoregressiveModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serialize(self)).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::table;
    use super::*;

    fn model() -> (Table, AutoregressiveModel) {
        let t = table(&[3, 90, 4], 120, 9);
        let cfg = ModelConfig {
            hidden_sizes: vec![10, 10],
            residual: true,
            embedding_dim: 5,
            ordering: vec![1, 2, 0],
            ..Default::default()
        };
        let m = AutoregressiveModel::build(cfg, &t).unwrap();
        (t, m)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (t, mut m) = model();
        m.set_wildcard_trained(true);
        let bytes = serialize(&m);
        assert_eq!(&bytes[..6], b"NARUv1");
        let back = deserialize_for(&bytes, &t).unwrap();
        assert!(back.wildcard_trained());
        assert_eq!(back.config(), m.config());
        assert_eq!(
            back.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            m.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
        for x in [[0, 5, 1], [2, 89, 3], [1, super::super::MASK, 0]] {
            assert_eq!(back.forward(&x).unwrap(), m.forward(&x).unwrap());
        }
        assert_eq!(serialize(&back), bytes);
    }

    #[test]
    fn distinct_errors() {
        let (_, m) = model();
        let bytes = serialize(&m);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(deserialize(&bad), Err(Error::BadMagic)));
        assert!(matches!(deserialize(&bytes[..bytes.len() - 3]), Err(Error::SizeMismatch { .. })));
        let other = table(&[3, 90, 5], 120, 9);
        assert!(matches!(deserialize_for(&bytes, &other), Err(Error::HashMismatch { .. })));
    }
}
