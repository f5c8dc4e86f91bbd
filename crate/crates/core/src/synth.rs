//! Clustered synthetic interactions, embeddings and tags.
//!
//! Users and items belong to latent clusters; users mostly pick items from
//! their own cluster with Zipf-skewed popularity. Item embeddings are the
//! cluster centroid plus isotropic noise, so `F` has latent rank equal to the
//! number of clusters up to the noise floor.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::datasets::{write_embeddings, DatasetStats, Dtype};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    /// Embedding dimension.
    pub dim: usize,
    /// Expected norm of the per-item embedding noise; centroids have unit norm.
    pub noise: f64,
    /// Probability that a pick comes from the user's own cluster.
    pub in_cluster: f64,
    /// Zipf exponent of within-cluster item popularity.
    pub zipf: f64,
    pub min_history: usize,
    pub max_history: usize,
    /// Every user and item ends with at least this many positives.
    pub min_degree: usize,
    /// Extra low-rated rows, as a fraction of positives.
    pub low_rated: f64,
    /// Random keyword tags per item, on top of the cluster genre tag.
    pub keyword_tags: usize,
    pub keyword_vocab: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 2000,
            items: 500,
            clusters: 8,
            dim: 64,
            noise: 0.1,
            in_cluster: 0.8,
            zipf: 1.0,
            min_history: 10,
            max_history: 40,
            min_degree: 10,
            low_rated: 0.1,
            keyword_tags: 2,
            keyword_vocab: 40,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Param(format!("synthetic config: {m}")));
        if self.clusters == 0 || self.dim == 0 {
            return bad("clusters and dim must be positive");
        }
        if self.items < self.clusters || self.users < self.clusters {
            return bad("need at least one user and one item per cluster");
        }
        if self.min_history == 0 || self.min_history > self.max_history {
            return bad("history bounds must satisfy 0 < min_history <= max_history");
        }
        if self.max_history > self.items || self.min_degree > self.users || self.min_degree > self.items {
            return bad("history or degree bounds exceed the item or user count");
        }
        if !(0.0..=1.0).contains(&self.in_cluster) || !(self.noise >= 0.0) || !(self.zipf >= 0.0) || !(self.low_rated >= 0.0) {
            return bad("in_cluster must lie in [0, 1]; noise, zipf and low_rated must be non-negative");
        }
        Ok(())
    }

    pub fn user_id(&self, u: usize) -> String {
        format!("u{u:0w$}", w = digits(self.users))
    }

    pub fn item_id(&self, i: usize) -> String {
        format!("i{i:0w$}", w = digits(self.items))
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).max(1).to_string().len()
}

/// Ground truth recorded next to the generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    pub stats: DatasetStats,
    pub latent_rank: usize,
    pub low_rated_rows: usize,
    pub user_clusters: Vec<usize>,
    pub item_clusters: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    /// Positive items per user, sorted.
    pub positives: Vec<Vec<u32>>,
    /// `(user, item, rating)` rows with rating ≤ 3, disjoint from the positives.
    pub low_rated: Vec<(u32, u32, u8)>,
    /// `dim x items`, columns in item index order.
    pub embeddings: DMatrix<f64>,
    /// `(item, tag)` assignments.
    pub tags: Vec<(u32, String)>,
    pub truth: SynthTruth,
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (m, n, c) = (config.users, config.items, config.clusters);
    let item_clusters: Vec<usize> = (0..n).map(|i| i % c).collect();
    let user_clusters: Vec<usize> = (0..m).map(|u| u % c).collect();
    let members: Vec<Vec<usize>> = (0..c).map(|k| (k..n).step_by(c).collect()).collect();

    // popularity rank inside each cluster is a random permutation
    let mut weight = vec![0.0; n];
    for items in &members {
        let mut order = items.clone();
        order.shuffle(&mut rng);
        for (rank, &i) in order.iter().enumerate() {
            weight[i] = 1.0 / ((rank + 1) as f64).powf(config.zipf);
        }
    }
    let cluster_pick: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|items| WeightedIndex::new(items.iter().map(|&i| weight[i])).expect("clusters are nonempty"))
        .collect();
    let global_pick = WeightedIndex::new(&weight).expect("weights are positive");

    let mut rows: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m];
    for (u, row) in rows.iter_mut().enumerate() {
        let target = rng.gen_range(config.min_history..=config.max_history);
        let k = user_clusters[u];
        while row.len() < target {
            let i = if rng.gen_bool(config.in_cluster) {
                members[k][cluster_pick[k].sample(&mut rng)]
            } else {
                global_pick.sample(&mut rng)
            };
            row.insert(i as u32);
        }
    }

    // top up rare items from users of their own cluster
    let mut degree = vec![0usize; n];
    for row in &rows {
        for &i in row {
            degree[i as usize] += 1;
        }
    }
    for i in 0..n {
        let mut candidates: Vec<usize> = (0..m).filter(|&u| user_clusters[u] == item_clusters[i]).collect();
        candidates.shuffle(&mut rng);
        let mut pool = candidates.into_iter().chain(0..m);
        while degree[i] < config.min_degree {
            let u = pool.next().expect("min_degree <= users");
            if rows[u].insert(i as u32) {
                degree[i] += 1;
            }
        }
    }
    let positives: Vec<Vec<u32>> = rows.iter().map(|r| r.iter().copied().collect()).collect();
    let ratings: usize = positives.iter().map(Vec::len).sum();

    let n_low = (config.low_rated * ratings as f64).round() as usize;
    let mut low = BTreeSet::new();
    let max_low = m * n - ratings;
    while low.len() < n_low.min(max_low) {
        let u = rng.gen_range(0..m);
        let i = rng.gen_range(0..n) as u32;
        if !rows[u].contains(&i) {
            low.insert((u as u32, i));
        }
    }
    let low_rated: Vec<(u32, u32, u8)> = low.into_iter().map(|(u, i)| (u, i, rng.gen_range(1..=3))).collect();

    let d = config.dim;
    let centroids = DMatrix::from_fn(d, c, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v / (d as f64).sqrt()
    });
    let sigma = config.noise / (d as f64).sqrt();
    let embeddings = DMatrix::from_fn(d, n, |r, i| {
        let v: f64 = StandardNormal.sample(&mut rng);
        centroids[(r, item_clusters[i])] + sigma * v
    });

    let mut tags = Vec::new();
    for (i, &k) in item_clusters.iter().enumerate() {
        tags.push((i as u32, format!("genre-{k}")));
        let mut kws = BTreeSet::new();
        while kws.len() < config.keyword_tags.min(config.keyword_vocab) {
            kws.insert(rng.gen_range(0..config.keyword_vocab));
        }
        tags.extend(kws.into_iter().map(|w| (i as u32, format!("kw-{w}"))));
    }

    let truth = SynthTruth {
        config: config.clone(),
        stats: DatasetStats::new(m, n, ratings),
        latent_rank: c,
        low_rated_rows: low_rated.len(),
        user_clusters,
        item_clusters,
    };
    Ok(SynthDataset { positives, low_rated, embeddings, tags, truth })
}

/// File names written by [`write_dataset`].
pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const EMBEDDINGS_HEADER: &str = "embeddings.json";
pub const TAGS_FILE: &str = "tags.tsv";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes interactions, embeddings, tags and ground truth into `dir`.
pub fn write_dataset(dataset: &SynthDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = &dataset.truth.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);

    let mut lines: Vec<(u32, u32, u8)> = Vec::new();
    for (u, row) in dataset.positives.iter().enumerate() {
        lines.extend(row.iter().map(|&i| (u as u32, i, rng.gen_range(4..=5))));
    }
    lines.extend(dataset.low_rated.iter().copied());
    lines.sort_unstable_by_key(|&(u, i, _)| (u, i));
    let path = dir.join(INTERACTIONS_FILE);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for (u, i, r) in lines {
        let ts = 1_600_000_000u64 + rng.gen_range(0..10_000_000u64);
        writeln!(w, "{}\t{}\t{r}\t{ts}", cfg.user_id(u as usize), cfg.item_id(i as usize)).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let ids: Vec<String> = (0..cfg.items).map(|i| cfg.item_id(i)).collect();
    write_embeddings(&dir.join(EMBEDDINGS_FILE), &dir.join(EMBEDDINGS_HEADER), &ids, &dataset.embeddings, Dtype::F32)?;

    let path = dir.join(TAGS_FILE);
    let mut text = String::new();
    for (i, tag) in &dataset.tags {
        text.push_str(&format!("{}\t{tag}\n", ids[*i as usize]));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(TRUTH_FILE);
    let json = serde_json::to_string_pretty(&dataset.truth).expect("truth serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}
