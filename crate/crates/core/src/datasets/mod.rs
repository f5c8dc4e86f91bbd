//! Interaction, tag and embedding ingestion plus the filtering and splitting
//! protocol that turns raw ratings into aligned train/validation/test matrices.

mod embeddings;
mod interactions;
mod kcore;
mod split;
mod tags;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_binary_rows, gram_dense, GramMatrix, GramSource};

pub use embeddings::{load_embeddings, read_embedding_file, write_embeddings, Dtype, EmbeddingHeader};
pub use interactions::{load_interactions, read_pairs, write_pairs, DEFAULT_RATING_THRESHOLD};
pub use kcore::{k_core_filter, DEFAULT_CORE};
pub use split::{largest_remainder, split, SplitBundle, SplitCounts, SplitManifest, SplitRatios};
pub use tags::{build_tag_matrix, load_tags};

/// A (user id, item id) interaction.
pub type Pair = (String, String);

/// Sparse binary user x item matrix in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    user_ids: Arc<[String]>,
    item_ids: Arc<[String]>,
}

impl InteractionMatrix {
    /// Builds a matrix from per-user item index lists. Rows are sorted and
    /// deduplicated.
    pub fn from_rows(
        user_ids: Arc<[String]>,
        item_ids: Arc<[String]>,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if rows.len() != user_ids.len() {
            return Err(Error::Dimension(format!(
                "{} rows for {} users",
                rows.len(),
                user_ids.len()
            )));
        }
        let n = item_ids.len();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= n {
                    return Err(Error::Dimension(format!("item index {last} out of range for {n} items")));
                }
            }
            indices.extend_from_slice(&row);
            indptr.push(indices.len());
        }
        Ok(Self {
            indptr,
            indices,
            user_ids,
            item_ids,
        })
    }

    /// Indexes users and items by sorted external id.
    pub fn from_pairs(pairs: &[Pair]) -> Result<Self> {
        let user_ids = sorted_unique(pairs.iter().map(|p| p.0.as_str()));
        let item_ids = sorted_unique(pairs.iter().map(|p| p.1.as_str()));
        Self::from_pairs_indexed(pairs, user_ids.into(), item_ids.into())
    }

    /// Places `pairs` into an existing id space; unknown ids are an error.
    pub fn from_pairs_indexed(
        pairs: &[Pair],
        user_ids: Arc<[String]>,
        item_ids: Arc<[String]>,
    ) -> Result<Self> {
        let users = index_of(&user_ids);
        let items = index_of(&item_ids);
        let mut rows = vec![Vec::new(); user_ids.len()];
        for (u, i) in pairs {
            let ui = *users
                .get(u.as_str())
                .ok_or_else(|| Error::Data(format!("unknown user id {u:?}")))?;
            let ii = *items
                .get(i.as_str())
                .ok_or_else(|| Error::Data(format!("unknown item id {i:?}")))?;
            rows[ui].push(ii as u32);
        }
        Self::from_rows(user_ids, item_ids, rows)
    }

    /// Nonzero entries of a dense 0/1 matrix; ids are `u{index}` / `i{index}`.
    pub fn from_dense(x: &DMatrix<f64>) -> Self {
        let user_ids: Arc<[String]> = (0..x.nrows()).map(|u| format!("u{u}")).collect();
        let item_ids: Arc<[String]> = (0..x.ncols()).map(|i| format!("i{i}")).collect();
        let rows = (0..x.nrows())
            .map(|u| (0..x.ncols()).filter(|&i| x[(u, i)] != 0.0).map(|i| i as u32).collect())
            .collect();
        Self::from_rows(user_ids, item_ids, rows).expect("indices in range by construction")
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, user: usize) -> &[u32] {
        &self.indices[self.indptr[user]..self.indptr[user + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    pub fn contains(&self, user: usize, item: u32) -> bool {
        self.row(user).binary_search(&item).is_ok()
    }

    pub fn user_ids(&self) -> &Arc<[String]> {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &Arc<[String]> {
        &self.item_ids
    }

    /// Interaction count per item.
    pub fn item_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_items()];
        for &i in &self.indices {
            deg[i as usize] += 1;
        }
        deg
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        self.indptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n_users(), self.n_items());
        for (u, row) in self.rows().enumerate() {
            for &i in row {
                x[(u, i as usize)] = 1.0;
            }
        }
        x
    }

    pub fn to_pairs(&self) -> Vec<Pair> {
        self.rows()
            .enumerate()
            .flat_map(|(u, row)| {
                row.iter()
                    .map(move |&i| (self.user_ids[u].clone(), self.item_ids[i as usize].clone()))
            })
            .collect()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::new(self.n_users(), self.n_items(), self.nnz())
    }
}

impl GramSource for InteractionMatrix {
    fn gram(&self) -> Result<GramMatrix> {
        gram_binary_rows(self.rows(), self.n_items())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Semantic,
    Tag,
}

/// Dense feature x item matrix (LLM embeddings `F` or tag multi-hot `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub kind: FeatureKind,
    pub item_ids: Arc<[String]>,
    /// Tag vocabulary for `FeatureKind::Tag`, in row order.
    pub row_labels: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn semantic(values: DMatrix<f64>, item_ids: Arc<[String]>) -> Result<Self> {
        if values.ncols() != item_ids.len() {
            return Err(Error::Dimension(format!(
                "{} feature columns for {} items",
                values.ncols(),
                item_ids.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("semantic features contain non-finite values".into()));
        }
        Ok(Self {
            values,
            kind: FeatureKind::Semantic,
            item_ids,
            row_labels: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    /// Indices of all-zero item columns.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&j| self.values.column(j).iter().all(|v| *v == 0.0))
            .collect()
    }

    /// Scales every nonzero column to unit L2 norm.
    pub fn l2_normalize_columns(&mut self) {
        for mut col in self.values.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }

    /// Errors unless this matrix's columns line up with `x`'s items.
    pub fn check_aligned(&self, x: &InteractionMatrix) -> Result<()> {
        if self.n_items() != x.n_items() || self.item_ids[..] != x.item_ids()[..] {
            return Err(Error::Data(format!(
                "feature matrix columns ({}) are not aligned with interaction items ({})",
                self.n_items(),
                x.n_items()
            )));
        }
        Ok(())
    }
}

impl GramSource for FeatureMatrix {
    fn gram(&self) -> Result<GramMatrix> {
        gram_dense(&self.values)
    }
}

/// Users, items, ratings and density of an interaction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
}

impl DatasetStats {
    pub fn new(users: usize, items: usize, ratings: usize) -> Self {
        let cells = users as f64 * items as f64;
        Self {
            users,
            items,
            ratings,
            density: if cells > 0.0 { ratings as f64 / cells } else { 0.0 },
        }
    }

    pub fn from_pairs(pairs: &[Pair]) -> Self {
        let users = sorted_unique(pairs.iter().map(|p| p.0.as_str())).len();
        let items = sorted_unique(pairs.iter().map(|p| p.1.as_str())).len();
        Self::new(users, items, pairs.len())
    }
}

pub(crate) fn sorted_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<&str> = ids.collect();
    v.sort_unstable();
    v.dedup();
    v.into_iter().map(str::to_owned).collect()
}

pub(crate) fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}
