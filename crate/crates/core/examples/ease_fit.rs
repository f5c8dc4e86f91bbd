//! Fit plain EASE on a toy interaction matrix and inspect the weights.

use l3ae::datasets::InteractionMatrix;
use l3ae::models::fit_ease;

fn main() -> l3ae::Result<()> {
    let pairs: Vec<(String, String)> = [
        ("alice", "dune"),
        ("alice", "foundation"),
        ("bob", "dune"),
        ("bob", "hyperion"),
        ("carol", "foundation"),
        ("carol", "hyperion"),
        ("carol", "dune"),
        ("dave", "neuromancer"),
        ("dave", "hyperion"),
    ]
    .iter()
    .map(|(u, i)| (u.to_string(), i.to_string()))
    .collect();
    let x = InteractionMatrix::from_pairs(&pairs)?;
    println!("{:?}", x.stats());

    let b = fit_ease(&x, 0.5)?;
    println!("{:>12} {}", "", x.item_ids().iter().map(|s| format!("{s:>12}")).collect::<String>());
    for (i, id) in x.item_ids().iter().enumerate() {
        let row: String = (0..b.n()).map(|j| format!("{:>12.4}", b.values[(i, j)])).collect();
        println!("{id:>12} {row}");
    }
    assert_eq!(b.max_abs_diag(), 0.0);
    Ok(())
}
