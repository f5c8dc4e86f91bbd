//! Normalized singular values of the interaction and embedding matrices.

use l3ae::linalg::spectrum;
use l3ae::synth::{generate, SynthConfig};

fn main() -> l3ae::Result<()> {
    let cfg = SynthConfig { seed: 2, ..Default::default() };
    let ds = generate(&cfg)?;
    let x = nalgebra::DMatrix::from_fn(cfg.users, cfg.items, |u, i| {
        ds.positives[u].binary_search(&(i as u32)).is_ok() as u8 as f64
    });
    let sx = spectrum(&x)?;
    let sf = spectrum(&ds.embeddings)?;
    println!("index\tx\tf");
    for i in 0..sf.len().min(32) {
        println!("{i}\t{:.4}\t{:.4}", sx[i], sf[i]);
    }
    let r = ds.truth.latent_rank;
    println!("at 2r = {}: x {:.4}, f {:.4}", 2 * r, sx[2 * r], sf[2 * r]);
    Ok(())
}
