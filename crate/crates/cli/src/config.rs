//! Experiment configuration (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use quant::solvers::{BetaRange, SaParams};
use quant::training::{LossWeights, ModelKind, SolverChoice, TrainConfig, DEFAULT_LAMBDA_MLP, DEFAULT_LAMBDA_UNIQUE};

use crate::error::{usage, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub eval: EvalBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(rename = "type")]
    pub kind: String,
    /// Graph size for RandGraph.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    /// Source shapes for the point-cloud problems.
    #[serde(default = "default_shapes")]
    pub shapes: usize,
    #[serde(default = "default_test_shapes")]
    pub test_shapes: usize,
    /// Points per outline or cloud.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Uniform noise on the 2D reference, percent of extent.
    #[serde(default)]
    pub noise: f64,
    /// Euler stage for 3D rotation (0, 1 or 2); absent means all 15 bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
    /// Pre-built datasets; they replace generation when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_data: Option<PathBuf>,
}

fn default_k() -> usize {
    4
}
fn default_count() -> usize {
    564
}
fn default_test_count() -> usize {
    141
}
fn default_shapes() -> usize {
    50
}
fn default_test_shapes() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// `dense`, `chimera`, `pegasus`, or a path to an adjacency file.
    #[serde(default = "default_topology")]
    pub topology: String,
}

fn default_kind() -> String {
    "qubo".into()
}
fn default_layers() -> usize {
    5
}
fn default_hidden() -> usize {
    78
}
fn default_topology() -> String {
    "dense".into()
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            kind: default_kind(),
            layers: default_layers(),
            hidden: default_hidden(),
            topology: default_topology(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainBlock {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub solver: SolverChoice,
    pub reads: usize,
    pub sweeps: usize,
    pub lambda_unique: f64,
    pub lambda_mlp: f64,
    pub standardize: bool,
    pub eval_every: usize,
}

impl Default for TrainBlock {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainBlock {
            lr: t.lr,
            batch_size: t.batch_size,
            epochs: t.epochs,
            solver: t.solver,
            reads: t.sa.num_reads,
            sweeps: t.sa.sweeps,
            lambda_unique: DEFAULT_LAMBDA_UNIQUE,
            lambda_mlp: DEFAULT_LAMBDA_MLP,
            standardize: t.standardize,
            eval_every: t.eval_every,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalBlock {
    pub solver: SolverChoice,
    pub reads: usize,
    pub sweeps: usize,
    /// Project graph-matching predictions onto permutations.
    pub project: bool,
}

impl Default for EvalBlock {
    fn default() -> Self {
        EvalBlock {
            solver: SolverChoice::Auto,
            reads: 100,
            sweeps: 1000,
            project: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub layers: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl ExperimentConfig {
    /// Parses `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        for p in [&mut cfg.problem.train_data, &mut cfg.problem.test_data].into_iter().flatten() {
            resolve(p);
            if !p.exists() {
                return Err(usage(format!("dataset {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| usage(format!("malformed config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(usage(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.model_kind()?;
        if let Some(s) = cfg.problem.stage {
            if s > 2 {
                return Err(usage(format!("problem.stage must be 0, 1 or 2, got {s}")));
            }
        }
        Ok(cfg)
    }

    pub fn model_kind(&self) -> CliResult<ModelKind> {
        ModelKind::from_tag(&self.model.kind).map_err(|e| usage(e.to_string()))
    }

    /// SHA-256 over the configuration without its seed and output directory.
    pub fn hash(&self) -> String {
        let mut value = toml::Value::try_from(self).expect("config serializes");
        if let Some(table) = value.as_table_mut() {
            table.remove("seed");
            table.remove("output_dir");
        }
        hash_text(&value.to_string())
    }

    pub fn train_config(&self, model: ModelKind, layers: usize, hidden: usize) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            problem_type: self.problem.kind.clone(),
            model,
            layers,
            hidden,
            lr: t.lr,
            batch_size: t.batch_size,
            epochs: t.epochs,
            solver: t.solver,
            sa: SaParams {
                num_reads: t.reads,
                sweeps: t.sweeps,
                beta: BetaRange::Auto,
                seed: 0,
            },
            weights: LossWeights {
                unique: t.lambda_unique,
                mlp: t.lambda_mlp,
            },
            seed: self.seed,
            standardize: t.standardize,
            eval_every: t.eval_every,
        }
    }

    pub fn eval_sa(&self, seed: u64) -> SaParams {
        SaParams {
            num_reads: self.eval.reads,
            sweeps: self.eval.sweeps,
            beta: BetaRange::Auto,
            seed,
        }
    }
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
