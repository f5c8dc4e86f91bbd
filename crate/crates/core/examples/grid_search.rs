//! Validation grid search for EASE and the staged l3ae search.

use l3ae::cli::{grid_search, GridSpec, ModelKind, Workbench};
use l3ae::datasets::FeatureMatrix;
use l3ae::synth::{generate, SynthConfig};

fn main() -> l3ae::Result<()> {
    let cfg = SynthConfig { users: 1000, items: 250, clusters: 6, seed: 5, ..Default::default() };
    let ds = generate(&cfg)?;
    let pairs: Vec<_> = ds
        .positives
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().map(move |&i| (u, i as usize)))
        .map(|(u, i)| (cfg.user_id(u), cfg.item_id(i)))
        .collect();
    let split = l3ae::datasets::split(&pairs, 5, Default::default())?;
    let f = FeatureMatrix::semantic(ds.embeddings.clone(), split.train.item_ids().clone())?;
    let bench = Workbench::new(split.train.clone(), None, Some(f))?;

    let grid = GridSpec { lambda_f: vec![10.0, 100.0, 1000.0], ..Default::default() };
    let outcome = grid_search(&bench, &split.validation, ModelKind::L3ae, &grid)?;
    print!("{}", outcome.to_tsv());
    println!("lambda* = {:?}, lambda_f* = {:?}", outcome.lambda_star, outcome.lambda_f_star);
    println!("selected {:?}", outcome.best_row().hyperparams);
    Ok(())
}
