//! File-based pipeline: synth, prepare, fit, eval, spectrum.

use l3ae::cli::{cmd_eval, cmd_fit, cmd_prepare, cmd_spectrum, cmd_synth, ModelKind, RunConfig};
use l3ae::models::Hyperparams;
use l3ae::synth::{SynthConfig, EMBEDDINGS_FILE, INTERACTIONS_FILE};

fn main() -> l3ae::Result<()> {
    let root = std::env::temp_dir().join("l3ae-synthetic-pipeline");
    let data = RunConfig {
        out: root.join("data"),
        synth: SynthConfig { users: 1000, items: 300, ..Default::default() },
        seed: 1,
        ..Default::default()
    };
    let truth = cmd_synth(&data)?;
    println!("generated {:?}", truth.stats);

    let run = RunConfig {
        interactions: Some(data.out.join(INTERACTIONS_FILE)),
        embeddings: Some(data.out.join(EMBEDDINGS_FILE)),
        out: root.join("run"),
        seed: 1,
        ..Default::default()
    };
    let manifest = cmd_prepare(&run)?;
    println!("split {:?}", manifest.counts);

    for (model, hp) in [
        (ModelKind::Ease, Hyperparams { lambda: Some(300.0), ..Default::default() }),
        (ModelKind::L3ae, Hyperparams { lambda_x: Some(150.0), lambda_kd: Some(150.0), lambda_f: Some(500.0), ..Default::default() }),
    ] {
        let cfg = RunConfig { model: Some(model), hyperparams: hp, ..run.clone() };
        cmd_fit(&cfg)?;
        println!("{model}");
        print!("{}", cmd_eval(&cfg)?.to_tsv());
    }
    let spectra = cmd_spectrum(&run)?;
    println!("spectrum rows: {}", spectra.x.len());
    println!("artifacts in {}", run.out.display());
    Ok(())
}
