use std::collections::HashMap;

use log::warn;

use crate::error::{Error, Result};

use super::Pair;

pub const DEFAULT_CORE: usize = 10;

/// Iteratively peels users and items with fewer than `k` interactions until
/// every survivor has at least `k`. Surviving pairs keep their input order.
pub fn k_core_filter(pairs: &[Pair], k: usize) -> Result<Vec<Pair>> {
    if k == 0 {
        return Err(Error::Param("k-core requires k >= 1".into()));
    }
    // Users occupy node ids [0, n_users), items follow.
    let mut user_idx: HashMap<&str, usize> = HashMap::new();
    let mut item_idx: HashMap<&str, usize> = HashMap::new();
    let mut edges = Vec::with_capacity(pairs.len());
    for (u, i) in pairs {
        let next = user_idx.len();
        let uu = *user_idx.entry(u.as_str()).or_insert(next);
        let next = item_idx.len();
        let ii = *item_idx.entry(i.as_str()).or_insert(next);
        edges.push((uu, ii));
    }
    let n_users = user_idx.len();
    let n_nodes = n_users + item_idx.len();

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for &(u, i) in &edges {
        adj[u].push(n_users + i);
        adj[n_users + i].push(u);
    }
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; n_nodes];
    let mut queued = vec![false; n_nodes];
    let mut stack: Vec<usize> = (0..n_nodes).filter(|&v| degree[v] < k).collect();
    for &v in &stack {
        queued[v] = true;
    }
    while let Some(v) = stack.pop() {
        alive[v] = false;
        for &w in &adj[v] {
            if alive[w] {
                degree[w] -= 1;
                if degree[w] < k && !queued[w] {
                    queued[w] = true;
                    stack.push(w);
                }
            }
        }
    }

    let kept: Vec<Pair> = pairs
        .iter()
        .zip(&edges)
        .filter(|(_, &(u, i))| alive[u] && alive[n_users + i])
        .map(|(p, _)| p.clone())
        .collect();
    if kept.is_empty() {
        warn!("{k}-core filtering removed every interaction");
    }
    Ok(kept)
}
