//! Average-over-all ranking with head/tail slices, written as JSON and TSV.

use l3ae::eval::{evaluate, RankingRequest};
use l3ae::models::fit_ease;
use l3ae::synth::{generate, SynthConfig};

fn main() -> l3ae::Result<()> {
    let cfg = SynthConfig { users: 800, items: 200, clusters: 4, seed: 11, ..Default::default() };
    let ds = generate(&cfg)?;
    let pairs: Vec<_> = ds
        .positives
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().map(move |&i| (u, i as usize)))
        .map(|(u, i)| (cfg.user_id(u), cfg.item_id(i)))
        .collect();
    let split = l3ae::datasets::split(&pairs, 11, Default::default())?;
    let b = fit_ease(&split.train, 200.0)?;

    let request = RankingRequest::new(&split.train, &b).with_k(vec![5, 10, 20]);
    let report = evaluate(&request, &split.test)?;
    print!("{}", report.to_tsv());
    println!("head items: {} of {}", report.head_item_ids.len(), split.n_items());
    println!("{}", report.to_json().lines().take(12).collect::<Vec<_>>().join("\n"));
    Ok(())
}
