use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use l3ae::cli::{self, ModelKind, RunConfig};
use l3ae::Result;

#[derive(Parser)]
#[command(name = "l3ae", version, about = "Linear autoencoder recommenders: prepare, fit, evaluate, search")]
struct Args {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long = "lambda-x", global = true)]
    lambda_x: Option<f64>,
    #[arg(long = "lambda-t", global = true)]
    lambda_t: Option<f64>,
    #[arg(long = "lambda-f", global = true)]
    lambda_f: Option<f64>,
    #[arg(long = "lambda-kd", global = true)]
    lambda_kd: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Comma-separated cutoffs, e.g. 10,20
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long = "memory-cap", global = true)]
    memory_cap: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true)]
    tags: Option<PathBuf>,
    #[arg(long, global = true)]
    prepared: Option<PathBuf>,
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Split scored by eval: test or validation
    #[arg(long, global = true)]
    target: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Threshold, 10-core filter and split raw interactions
    Prepare,
    /// Fit one model at fixed hyperparameters
    Fit,
    /// Score exported weights on the held-out split
    Eval,
    /// Validation grid search
    Grid,
    /// Normalized singular values of X and F
    Spectrum,
    /// Run the brute-force oracle suite
    Audit,
    /// Generate a clustered synthetic dataset
    Synth,
}

fn config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.model {
        cfg.model = Some(m.parse::<ModelKind>()?);
    }
    let hp = &mut cfg.hyperparams;
    for (slot, flag) in [
        (&mut hp.lambda, args.lambda),
        (&mut hp.lambda_x, args.lambda_x),
        (&mut hp.lambda_t, args.lambda_t),
        (&mut hp.lambda_f, args.lambda_f),
        (&mut hp.lambda_kd, args.lambda_kd),
        (&mut hp.alpha, args.alpha),
        (&mut hp.beta, args.beta),
    ] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.k {
        cfg.k = v.clone();
    }
    if let Some(v) = args.memory_cap {
        cfg.memory_cap = v;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &args.target {
        cfg.target = v.clone();
    }
    for (slot, flag) in [
        (&mut cfg.interactions, &args.interactions),
        (&mut cfg.embeddings, &args.embeddings),
        (&mut cfg.tags, &args.tags),
        (&mut cfg.prepared, &args.prepared),
        (&mut cfg.weights, &args.weights),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    cfg.validate()?;
    if !matches!(args.command, Command::Synth | Command::Audit) {
        cfg.check_inputs()?;
    }
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool> {
    let cfg = config(args)?;
    match args.command {
        Command::Prepare => {
            let m = cli::cmd_prepare(&cfg)?;
            println!("users\titems\tratings\tdensity");
            println!("{}\t{}\t{}\t{:.6e}", m.stats.users, m.stats.items, m.stats.ratings, m.stats.density);
        }
        Command::Fit => {
            let w = cli::cmd_fit(&cfg)?;
            println!("{} n={} {}", w.model, w.n(), serde_json::to_string(&w.hyperparams).unwrap());
        }
        Command::Eval => print!("{}", cli::cmd_eval(&cfg)?.to_tsv()),
        Command::Grid => {
            let g = cli::cmd_grid(&cfg)?;
            print!("{}", g.to_tsv());
        }
        Command::Spectrum => print!("{}", cli::cmd_spectrum(&cfg)?.to_tsv()),
        Command::Audit => {
            let report = cli::cmd_audit(&cfg)?;
            print!("{}", report.to_tsv());
            return Ok(report.passed());
        }
        Command::Synth => {
            let t = cli::cmd_synth(&cfg)?;
            println!("users\titems\tratings\tdensity");
            println!("{}\t{}\t{}\t{:.6e}", t.stats.users, t.stats.items, t.stats.ratings, t.stats.density);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit: some checks failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
