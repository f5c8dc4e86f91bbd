//! Closed-form item-to-item models.
//!
//! Every fit returns a dense `n x n` [`ItemWeightMatrix`] whose column `i`
//! scores item `i` from a user's interaction row (`s_ui = X_u* · B_*i`).

mod ease;
mod fusion;
mod io;
mod l3ae;
mod semantic;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ease::{ease_from_gram, fit_ease};
pub use fusion::{blend, fit_additive, fit_collective};
pub use io::{read_weights, write_weights, WeightHeader};
pub use l3ae::{fit_l3ae, l3ae_from_gram};
pub use semantic::{cosine_similarity_matrix, fit_semantic_ease};

/// Hyperparameters of the whole model family. Unused ones stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_kd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Hyperparams {
    /// Fills unset fields from `other`.
    pub fn or(self, other: Hyperparams) -> Hyperparams {
        Hyperparams {
            lambda: self.lambda.or(other.lambda),
            lambda_x: self.lambda_x.or(other.lambda_x),
            lambda_t: self.lambda_t.or(other.lambda_t),
            lambda_f: self.lambda_f.or(other.lambda_f),
            lambda_kd: self.lambda_kd.or(other.lambda_kd),
            alpha: self.alpha.or(other.alpha),
            beta: self.beta.or(other.beta),
        }
    }
}

/// Dense `n x n` item weights (`B`, `S`, `C`, `D`, ...) with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemWeightMatrix {
    pub values: DMatrix<f64>,
    pub zero_diag: bool,
    pub model: String,
    pub hyperparams: Hyperparams,
    pub item_ids: Arc<[String]>,
}

impl ItemWeightMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.values.diagonal().amax()
    }

    /// Checks finiteness and, when flagged, an exactly zero diagonal.
    pub fn validate(&self) -> Result<()> {
        if self.values.nrows() != self.values.ncols() {
            return Err(Error::Dimension(format!(
                "weight matrix is {}x{}",
                self.values.nrows(),
                self.values.ncols()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{} weights contain non-finite values", self.model)));
        }
        if self.zero_diag && self.max_abs_diag() != 0.0 {
            return Err(Error::Data(format!("{} weights have a nonzero diagonal", self.model)));
        }
        Ok(())
    }
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::Param(format!("{name} must be positive and finite, got {value}")));
    }
    Ok(())
}

pub(crate) fn require_non_negative(name: &str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::Param(format!("{name} must be non-negative and finite, got {value}")));
    }
    Ok(())
}
