//! Phase 1 fits `S` on embeddings; phase 2 distills it into the interaction
//! model under the budget `λ_X + λ_KD = λ*`.

use l3ae::cli::l3ae_budget_pairs;
use l3ae::datasets::FeatureMatrix;
use l3ae::eval::{evaluate, RankingRequest};
use l3ae::models::{fit_ease, fit_l3ae, fit_semantic_ease};
use l3ae::synth::{generate, SynthConfig};

fn main() -> l3ae::Result<()> {
    let cfg = SynthConfig { seed: 3, ..Default::default() };
    let ds = generate(&cfg)?;
    let pairs: Vec<_> = ds
        .positives
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().map(move |&i| (u, i as usize)))
        .map(|(u, i)| (cfg.user_id(u), cfg.item_id(i)))
        .collect();
    let split = l3ae::datasets::split(&pairs, 3, Default::default())?;
    let x = &split.train;
    let f = FeatureMatrix::semantic(ds.embeddings.clone(), x.item_ids().clone())?;

    let lambda_star = 500.0;
    let s = fit_semantic_ease(&f, 500.0)?;
    let report = |w: l3ae::models::ItemWeightMatrix| evaluate(&RankingRequest::new(x, &w), &split.test);

    let ease = report(fit_ease(x, lambda_star)?)?;
    println!(
        "ease   lambda={lambda_star:<6} R@20 {:.4}  tail R@20 {:.4}",
        ease.overall().recall_at[&20],
        ease.slice("tail").unwrap().recall_at[&20]
    );
    for (kd, lx) in l3ae_budget_pairs(lambda_star, &[50.0, 100.0, 200.0, 300.0]) {
        let r = report(fit_l3ae(x, &s, lx, kd)?)?;
        println!(
            "l3ae   kd={kd:<5} x={lx:<5} R@20 {:.4}  tail R@20 {:.4}",
            r.overall().recall_at[&20],
            r.slice("tail").unwrap().recall_at[&20]
        );
    }
    Ok(())
}
