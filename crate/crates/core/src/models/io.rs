//! Weight-matrix files: a JSON header plus a row-major little-endian payload.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datasets::Dtype;
use crate::error::{Error, Result};

use super::{Hyperparams, ItemWeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHeader {
    pub n: usize,
    pub dtype: String,
    pub layout: String,
    pub model: String,
    pub zero_diag: bool,
    pub hyperparams: Hyperparams,
    pub item_ids: Vec<String>,
}

/// Exports `weights`. Final model weights use `Dtype::F32`; intermediate
/// matrices that feed another solve should stay `Dtype::F64`.
pub fn write_weights(payload_path: &Path, header_path: &Path, weights: &ItemWeightMatrix, dtype: Dtype) -> Result<()> {
    let n = weights.n();
    if weights.item_ids.len() != n {
        return Err(Error::Dimension(format!("{} item ids for {n} weight rows", weights.item_ids.len())));
    }
    let header = WeightHeader {
        n,
        dtype: dtype.as_str().to_string(),
        layout: "row-major".to_string(),
        model: weights.model.clone(),
        zero_diag: weights.zero_diag,
        hyperparams: weights.hyperparams,
        item_ids: weights.item_ids.to_vec(),
    };
    let mut payload = Vec::with_capacity(n * n * dtype.size());
    // transpose storage is the row-major view of the column-major matrix
    dtype.encode(weights.values.transpose().iter().copied(), &mut payload);
    fs::write(payload_path, payload).map_err(|e| Error::io(payload_path, e))?;
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(header_path, json).map_err(|e| Error::io(header_path, e))
}

pub fn read_weights(payload_path: &Path, header_path: &Path) -> Result<ItemWeightMatrix> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: WeightHeader = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: header_path.to_path_buf(),
        source: e,
    })?;
    let dtype = Dtype::parse(&header.dtype)?;
    if header.layout != "row-major" {
        return Err(Error::Data(format!("unsupported weight layout {:?}", header.layout)));
    }
    if header.item_ids.len() != header.n {
        return Err(Error::Data(format!(
            "header declares n = {} but lists {} item ids",
            header.n,
            header.item_ids.len()
        )));
    }
    let payload = fs::read(payload_path).map_err(|e| Error::io(payload_path, e))?;
    let expected = header.n * header.n * dtype.size();
    if payload.len() != expected {
        return Err(Error::Data(format!(
            "{}: payload length mismatch: {} bytes, header implies {expected}",
            payload_path.display(),
            payload.len()
        )));
    }
    let values = DMatrix::from_row_slice(header.n, header.n, &dtype.decode(&payload));
    let weights = ItemWeightMatrix {
        values,
        zero_diag: header.zero_diag,
        model: header.model,
        hyperparams: header.hyperparams,
        item_ids: header.item_ids.into(),
    };
    weights.validate()?;
    Ok(weights)
}
