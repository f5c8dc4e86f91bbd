use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{sorted_unique, DatasetStats, InteractionMatrix, Pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Param(format!("split ratios must lie in [0, 1], got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Param(format!("split ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// Apportions `count` items over three ratios by largest remainder; equal
/// remainders go to train, then validation, then test.
pub fn largest_remainder(count: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = ratios.as_array().map(|r| r * count as f64);
    let mut parts = quotas.map(|q| (q + 1e-9).floor() as usize);
    let mut fracs = [0.0; 3];
    for p in 0..3 {
        fracs[p] = (quotas[p] - parts[p] as f64).max(0.0);
    }
    let mut left = count.saturating_sub(parts.iter().sum());
    while left > 0 {
        let mut best = 0;
        for p in 1..3 {
            if fracs[p] > fracs[best] + 1e-9 {
                best = p;
            }
        }
        parts[best] += 1;
        fracs[best] = f64::NEG_INFINITY;
        left -= 1;
    }
    parts
}

/// Train, validation and test matrices over one shared user/item index.
#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub train: InteractionMatrix,
    pub validation: InteractionMatrix,
    pub test: InteractionMatrix,
    pub seed: u64,
    pub ratios: SplitRatios,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Written next to the split files so a run can be audited and reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub counts: SplitCounts,
    pub stats: DatasetStats,
}

impl SplitBundle {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            train: self.train.nnz(),
            validation: self.validation.nnz(),
            test: self.test.nnz(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }

    pub fn manifest(&self) -> SplitManifest {
        let counts = self.counts();
        SplitManifest {
            seed: self.seed,
            ratios: self.ratios,
            counts,
            stats: DatasetStats::new(
                self.train.n_users(),
                self.train.n_items(),
                counts.train + counts.validation + counts.test,
            ),
        }
    }
}

/// Per-user seeded random split.
///
/// Each user's items (in index order) are shuffled by a single ChaCha8 stream
/// seeded with `seed` and cut at the largest-remainder counts.
pub fn split(pairs: &[Pair], seed: u64, ratios: SplitRatios) -> Result<SplitBundle> {
    ratios.validate()?;
    if pairs.is_empty() {
        return Err(Error::Data("cannot split an empty interaction set".into()));
    }
    let user_ids: Arc<[String]> = sorted_unique(pairs.iter().map(|p| p.0.as_str())).into();
    let item_ids: Arc<[String]> = sorted_unique(pairs.iter().map(|p| p.1.as_str())).into();
    let full = InteractionMatrix::from_pairs_indexed(pairs, user_ids.clone(), item_ids.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<Vec<u32>>; 3] = Default::default();
    for row in full.rows() {
        let mut items = row.to_vec();
        items.shuffle(&mut rng);
        let [n_train, n_val, _] = largest_remainder(items.len(), &ratios);
        parts[0].push(items[..n_train].to_vec());
        parts[1].push(items[n_train..n_train + n_val].to_vec());
        parts[2].push(items[n_train + n_val..].to_vec());
    }
    let [train, validation, test] = parts;
    Ok(SplitBundle {
        train: InteractionMatrix::from_rows(user_ids.clone(), item_ids.clone(), train)?,
        validation: InteractionMatrix::from_rows(user_ids.clone(), item_ids.clone(), validation)?,
        test: InteractionMatrix::from_rows(user_ids, item_ids, test)?,
        seed,
        ratios,
    })
}
