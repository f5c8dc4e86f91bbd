//! Collective and additive fusion with tags and with embeddings.

use l3ae::datasets::{build_tag_matrix, FeatureMatrix};
use l3ae::eval::{evaluate, RankingRequest};
use l3ae::models::{fit_additive, fit_collective, fit_ease};
use l3ae::synth::{generate, SynthConfig};

fn main() -> l3ae::Result<()> {
    let cfg = SynthConfig { users: 600, items: 150, clusters: 5, dim: 32, seed: 7, ..Default::default() };
    let ds = generate(&cfg)?;
    let pairs: Vec<_> = ds
        .positives
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().map(move |&i| (u, i as usize)))
        .map(|(u, i)| (cfg.user_id(u), cfg.item_id(i)))
        .collect();
    let split = l3ae::datasets::split(&pairs, 7, Default::default())?;
    let x = &split.train;

    let tag_pairs: Vec<_> = ds.tags.iter().map(|(i, t)| (cfg.item_id(*i as usize), t.clone())).collect();
    let t = build_tag_matrix(&tag_pairs, x.item_ids());
    let f = FeatureMatrix::semantic(ds.embeddings.clone(), x.item_ids().clone())?;

    let models = [
        fit_ease(x, 100.0)?,
        fit_collective(x, &t, 1.0, 100.0)?,
        fit_additive(x, &t, 100.0, 5.0, 0.8)?,
        fit_collective(x, &f, 1.0, 100.0)?,
        fit_additive(x, &f, 100.0, 5.0, 0.8)?,
    ];
    println!("{:<14} {:>8} {:>8}", "model", "R@20", "N@20");
    for w in &models {
        let r = evaluate(&RankingRequest::new(x, w), &split.test)?;
        println!("{:<14} {:>8.4} {:>8.4}", w.model, r.overall().recall_at[&20], r.overall().ndcg_at[&20]);
    }
    Ok(())
}
