//! Batch driver: run configuration and the prepare / fit / eval / grid /
//! spectrum / audit / synth commands.

mod commands;
mod grid;
mod workbench;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{SplitRatios, DEFAULT_CORE, DEFAULT_RATING_THRESHOLD};
use crate::error::{Error, Result};
use crate::eval::DEFAULT_K;
use crate::linalg::DEFAULT_MEMORY_CAP;
use crate::models::Hyperparams;
use crate::synth::SynthConfig;

pub use commands::{
    cmd_audit, cmd_eval, cmd_fit, cmd_grid, cmd_prepare, cmd_spectrum, cmd_synth, load_prepared, weight_paths,
    PreparedSplit, SpectrumTable,
};
pub use grid::{grid_search, l3ae_budget_pairs, GridOutcome, GridRow, SELECTION_K};
pub use workbench::Workbench;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ease,
    Cease,
    AddEase,
    LlmEase,
    Cosine,
    L3ae,
    LlmCease,
    LlmAddEase,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Ease,
        ModelKind::Cease,
        ModelKind::AddEase,
        ModelKind::LlmEase,
        ModelKind::Cosine,
        ModelKind::L3ae,
        ModelKind::LlmCease,
        ModelKind::LlmAddEase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ease => "ease",
            ModelKind::Cease => "cease",
            ModelKind::AddEase => "add-ease",
            ModelKind::LlmEase => "llm-ease",
            ModelKind::Cosine => "cosine",
            ModelKind::L3ae => "l3ae",
            ModelKind::LlmCease => "llm-cease",
            ModelKind::LlmAddEase => "llm-add-ease",
        }
    }

    pub fn needs_tags(self) -> bool {
        matches!(self, ModelKind::Cease | ModelKind::AddEase)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(
            self,
            ModelKind::LlmEase | ModelKind::Cosine | ModelKind::L3ae | ModelKind::LlmCease | ModelKind::LlmAddEase
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = ModelKind::ALL.iter().map(|m| m.as_str()).collect();
            Error::Config(format!("unknown model {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Search ranges per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lambda: Vec<f64>,
    pub lambda_x: Vec<f64>,
    pub lambda_t: Vec<f64>,
    pub lambda_f: Vec<f64>,
    pub lambda_kd: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

const RIDGE_GRID: [f64; 9] = [0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1000.0];

impl Default for GridSpec {
    fn default() -> Self {
        let kd: Vec<f64> = (1..=10).map(|i| 10.0 * i as f64).chain([150.0, 200.0, 250.0, 300.0]).collect();
        Self {
            lambda: RIDGE_GRID.to_vec(),
            lambda_x: RIDGE_GRID.to_vec(),
            lambda_t: RIDGE_GRID.to_vec(),
            lambda_f: RIDGE_GRID.to_vec(),
            lambda_kd: kd,
            alpha: vec![0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            beta: vec![0.2, 0.4, 0.6, 0.8],
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let axes: [(&str, &Vec<f64>); 7] = [
            ("lambda", &self.lambda),
            ("lambda_x", &self.lambda_x),
            ("lambda_t", &self.lambda_t),
            ("lambda_f", &self.lambda_f),
            ("lambda_kd", &self.lambda_kd),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
        ];
        for (name, values) in axes {
            if values.is_empty() {
                return Err(Error::Config(format!("grid axis {name} is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("grid axis {name} has non-finite values")));
            }
        }
        Ok(())
    }
}

/// Everything a command may need. Loaded from TOML, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Raw `user item rating timestamp` file for `prepare`.
    pub interactions: Option<PathBuf>,
    /// Embedding payload; its header defaults to the same path with `.json`.
    pub embeddings: Option<PathBuf>,
    pub embeddings_header: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    /// Directory written by `prepare`; defaults to `out`.
    pub prepared: Option<PathBuf>,
    /// Weight payload for `eval`; defaults to `out/weights-<model>.bin`.
    pub weights: Option<PathBuf>,
    /// Phase-1 `S` cache (payload path; header alongside with `.json`).
    pub semantic_cache: Option<PathBuf>,
    pub out: PathBuf,
    pub model: Option<ModelKind>,
    pub seed: u64,
    pub k: Vec<usize>,
    pub memory_cap: u64,
    pub rating_threshold: f64,
    pub core: usize,
    pub ratios: SplitRatios,
    pub normalize_embeddings: bool,
    /// Split scored by `eval`: `test` or `validation`.
    pub target: String,
    pub audit_instances: usize,
    pub audit_steps: usize,
    pub hyperparams: Hyperparams,
    pub grid: GridSpec,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interactions: None,
            embeddings: None,
            embeddings_header: None,
            tags: None,
            prepared: None,
            weights: None,
            semantic_cache: None,
            out: PathBuf::from("out"),
            model: None,
            seed: 0,
            k: DEFAULT_K.to_vec(),
            memory_cap: DEFAULT_MEMORY_CAP,
            rating_threshold: DEFAULT_RATING_THRESHOLD,
            core: DEFAULT_CORE,
            ratios: SplitRatios::default(),
            normalize_embeddings: false,
            target: "test".into(),
            audit_instances: 20,
            audit_steps: crate::oracle::DEFAULT_STEPS,
            hyperparams: Hyperparams::default(),
            grid: GridSpec::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.interactions,
            &mut self.embeddings,
            &mut self.embeddings_header,
            &mut self.tags,
            &mut self.prepared,
            &mut self.weights,
            &mut self.semantic_cache,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    /// Checks that grids, ratios and cutoffs are usable.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.ratios.validate()?;
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Error::Config(format!("k list must be nonempty and positive, got {:?}", self.k)));
        }
        if !matches!(self.target.as_str(), "test" | "validation") {
            return Err(Error::Config(format!("target must be test or validation, got {:?}", self.target)));
        }
        if self.core == 0 {
            return Err(Error::Config("core must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks that every referenced input file exists.
    pub fn check_inputs(&self) -> Result<()> {
        for p in [&self.interactions, &self.embeddings, &self.embeddings_header, &self.tags]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
            }
        }
        Ok(())
    }

    pub fn prepared_dir(&self) -> &Path {
        self.prepared.as_deref().unwrap_or(&self.out)
    }

    pub fn embeddings_header_path(&self) -> Option<PathBuf> {
        self.embeddings_header
            .clone()
            .or_else(|| self.embeddings.as_ref().map(|p| p.with_extension("json")))
    }

    pub fn require_model(&self) -> Result<ModelKind> {
        self.model.ok_or_else(|| Error::Config("no model given (use --model or `model` in the config)".into()))
    }
}
