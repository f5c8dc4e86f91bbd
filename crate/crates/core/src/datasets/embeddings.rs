//! Precomputed item embeddings: a JSON header sidecar plus a raw
//! little-endian, column-major (item-contiguous) payload.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{index_of, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(Error::Data(format!("unknown dtype {other:?}, expected \"f32\" or \"f64\""))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub(crate) fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        }
    }

    pub(crate) fn encode(self, values: impl Iterator<Item = f64>, out: &mut Vec<u8>) {
        for v in values {
            match self {
                Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub d: usize,
    pub n: usize,
    pub dtype: String,
    pub layout: String,
    pub item_ids: Vec<String>,
}

/// Reads an embedding file pair as a `d x n` matrix in header item order.
pub fn read_embedding_file(matrix_path: &Path, header_path: &Path) -> Result<(EmbeddingHeader, DMatrix<f64>)> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: EmbeddingHeader = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: header_path.to_path_buf(),
        source: e,
    })?;
    let dtype = Dtype::parse(&header.dtype)?;
    if header.layout != "column-major" {
        return Err(Error::Data(format!(
            "unsupported embedding layout {:?}, expected \"column-major\"",
            header.layout
        )));
    }
    if header.item_ids.len() != header.n {
        return Err(Error::Data(format!(
            "header declares n = {} but lists {} item ids",
            header.n,
            header.item_ids.len()
        )));
    }
    let payload = fs::read(matrix_path).map_err(|e| Error::io(matrix_path, e))?;
    let expected = header.d * header.n * dtype.size();
    if payload.len() != expected {
        return Err(Error::Data(format!(
            "{}: payload length mismatch: {} bytes, header implies {} ({} x {} x {})",
            matrix_path.display(),
            payload.len(),
            expected,
            header.d,
            header.n,
            dtype.size()
        )));
    }
    let values = dtype.decode(&payload);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{}: non-finite embedding values", matrix_path.display())));
    }
    Ok((header.clone(), DMatrix::from_vec(header.d, header.n, values)))
}

/// Loads embeddings and reorders columns to `item_ids` (the interaction item
/// index). Missing items are an error; extra embeddings are dropped with a
/// warning.
pub fn load_embeddings(
    matrix_path: &Path,
    header_path: &Path,
    item_ids: &Arc<[String]>,
    normalize: bool,
) -> Result<FeatureMatrix> {
    let (header, raw) = read_embedding_file(matrix_path, header_path)?;
    let position = index_of(&header.item_ids);
    let mut missing = Vec::new();
    let mut columns = Vec::with_capacity(item_ids.len());
    for id in item_ids.iter() {
        match position.get(id.as_str()) {
            Some(&c) => columns.push(c),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        let shown: Vec<_> = missing.iter().take(20).collect();
        return Err(Error::Data(format!(
            "{} items have no embedding: {:?}{}",
            missing.len(),
            shown,
            if missing.len() > shown.len() { " ..." } else { "" }
        )));
    }
    let wanted: HashSet<&str> = item_ids.iter().map(String::as_str).collect();
    let extra = header.item_ids.iter().filter(|id| !wanted.contains(id.as_str())).count();
    if extra > 0 {
        warn!("ignoring {extra} embeddings for items outside the interaction data");
    }
    let values = raw.select_columns(&columns);
    let mut features = FeatureMatrix::semantic(values, item_ids.clone())?;
    if normalize {
        features.l2_normalize_columns();
    }
    Ok(features)
}

/// Writes `values` (`d x n`, columns in `item_ids` order) as header + payload.
pub fn write_embeddings(
    matrix_path: &Path,
    header_path: &Path,
    item_ids: &[String],
    values: &DMatrix<f64>,
    dtype: Dtype,
) -> Result<()> {
    if values.ncols() != item_ids.len() {
        return Err(Error::Dimension(format!(
            "{} columns for {} item ids",
            values.ncols(),
            item_ids.len()
        )));
    }
    let header = EmbeddingHeader {
        d: values.nrows(),
        n: values.ncols(),
        dtype: dtype.as_str().to_string(),
        layout: "column-major".to_string(),
        item_ids: item_ids.to_vec(),
    };
    let mut payload = Vec::with_capacity(values.len() * dtype.size());
    // nalgebra storage is column-major already
    dtype.encode(values.iter().copied(), &mut payload);
    fs::write(matrix_path, payload).map_err(|e| Error::io(matrix_path, e))?;
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(header_path, json).map_err(|e| Error::io(header_path, e))
}
