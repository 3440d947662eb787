use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::metrics::{diag_solve, pure_infer};
use crate::nn::{load_checkpoint, save_checkpoint, Activation, CheckpointMeta, MlpParams};
use crate::problems::ProblemInstance;
use crate::qubo::{QuboMatrix, Topology};
use crate::rng;
use crate::scalar::Scalar;
use crate::solvers::{ExhaustiveSolver, QuboSampler, SaParams, SimulatedAnnealer};

/// What the network emits and how bits are read off it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Free parameters of a masked QUBO, solved for the bits.
    Qubo,
    /// A diagonal QUBO, solved in closed form.
    Diag,
    /// The bits directly, thresholded at zero.
    Pure,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Qubo => "qubo",
            ModelKind::Diag => "diag",
            ModelKind::Pure => "pure",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "qubo" | "ours" => Ok(ModelKind::Qubo),
            "diag" => Ok(ModelKind::Diag),
            "pure" => Ok(ModelKind::Pure),
            other => Err(Error::Parse(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Exhaustive up to [`AUTO_EXHAUSTIVE_MAX_N`] variables, annealing beyond.
    Auto,
    Exhaustive,
    Sa,
}

pub const AUTO_EXHAUSTIVE_MAX_N: usize = 15;

/// A QUBO sampler picked by [`SolverChoice`] for a given problem size.
#[derive(Clone, Debug)]
pub enum Sampler {
    Exhaustive(ExhaustiveSolver),
    Anneal(SimulatedAnnealer),
}

impl Sampler {
    pub fn for_size(choice: SolverChoice, n: usize, sa: SaParams) -> Self {
        let exhaustive = match choice {
            SolverChoice::Exhaustive => true,
            SolverChoice::Sa => false,
            SolverChoice::Auto => n <= AUTO_EXHAUSTIVE_MAX_N,
        };
        if exhaustive {
            Sampler::Exhaustive(ExhaustiveSolver::default())
        } else {
            Sampler::Anneal(SimulatedAnnealer { params: sa })
        }
    }
}

impl<T: Scalar> QuboSampler<T> for Sampler {
    fn sample(&self, qubo: &QuboMatrix<T>, seed: u64) -> Result<crate::solvers::SolverResult<T>> {
        match self {
            Sampler::Exhaustive(s) => s.sample(qubo, seed),
            Sampler::Anneal(s) => s.sample(qubo, seed),
        }
    }
}

/// A trained network together with the output layout it was trained for.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    kind: ModelKind,
    topology: Topology,
    index: Vec<(usize, usize)>,
    net: MlpParams<T>,
}

pub fn to_scalar<T: Scalar>(p: &[f64]) -> Vec<T> {
    p.iter().map(|&v| T::from_f64_lossy(v)).collect()
}

impl<T: Scalar> Model<T> {
    /// `topology` fixes the solution width `n`; for [`ModelKind::Diag`] it is
    /// replaced by the diagonal mask of that width.
    pub fn new(kind: ModelKind, topology: Topology, net: MlpParams<T>) -> Result<Self> {
        let topology = match kind {
            ModelKind::Diag => Topology::diagonal(topology.n()),
            _ => topology,
        };
        let index = topology.free_parameter_index();
        let want = match kind {
            ModelKind::Pure => topology.n(),
            _ => index.len(),
        };
        if net.output_dim() != want {
            return Err(Error::Dimension {
                what: "network output width",
                expected: want,
                got: net.output_dim(),
            });
        }
        let last = net.specs().last().map(|s| s.activation);
        if kind == ModelKind::Pure && last != Some(Activation::None) {
            return Err(Error::Shape("the direct-regression model needs a linear last layer".into()));
        }
        Ok(Model {
            kind,
            topology,
            index,
            net,
        })
    }

    /// Output width the network needs for `kind` on `topology`.
    pub fn output_width(kind: ModelKind, topology: &Topology) -> usize {
        match kind {
            ModelKind::Qubo => topology.free_parameter_index().len(),
            ModelKind::Diag | ModelKind::Pure => topology.n(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn index(&self) -> &[(usize, usize)] {
        &self.index
    }

    pub fn net(&self) -> &MlpParams<T> {
        &self.net
    }

    pub(crate) fn net_mut(&mut self) -> &mut MlpParams<T> {
        &mut self.net
    }

    /// Solution width.
    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// The QUBO predicted for `p`. Errors for the direct-regression model.
    pub fn qubo(&self, p: &[f64]) -> Result<QuboMatrix<T>> {
        if self.kind == ModelKind::Pure {
            return Err(Error::InvalidParam("the direct-regression model emits no QUBO".into()));
        }
        let trace = self.net.forward(&to_scalar(p))?;
        QuboMatrix::from_free_parameters(&self.topology, &self.index, trace.output())
    }

    pub fn predict(&self, p: &[f64], sampler: &dyn QuboSampler<T>, seed: u64) -> Result<BitString> {
        match self.kind {
            ModelKind::Pure => pure_infer(&self.net, &to_scalar(p)),
            ModelKind::Diag => diag_solve(&self.qubo(p)?),
            ModelKind::Qubo => Ok(sampler.sample(&self.qubo(p)?, seed)?.best().clone()),
        }
    }

    /// Predictions in instance order; instance `i` uses child seed `i`.
    pub fn predict_all(&self, instances: &[ProblemInstance], sampler: &dyn QuboSampler<T>, seed: u64) -> Result<Vec<BitString>> {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| self.predict(&inst.p, sampler, rng::child_seed(seed, i as u64)))
            .collect()
    }

    /// Percentage of instances whose prediction equals `x_hat` exactly.
    pub fn accuracy(&self, instances: &[ProblemInstance], sampler: &dyn QuboSampler<T>, seed: u64) -> Result<f64> {
        if instances.is_empty() {
            return Ok(0.0);
        }
        let preds = self.predict_all(instances, sampler, seed)?;
        let hits = preds.iter().zip(instances).filter(|(p, i)| **p == i.x_hat).count();
        Ok(100.0 * hits as f64 / instances.len() as f64)
    }

    /// Writes the checkpoint and its metadata sidecar; `meta.model` and
    /// `meta.topology` are filled in from the model.
    pub fn save(&self, path: &Path, meta: &CheckpointMeta) -> Result<()> {
        save_checkpoint(&self.net, path)?;
        CheckpointMeta {
            model: Some(self.kind.tag().to_string()),
            topology: Some(self.topology.to_adjacency_string()),
            ..meta.clone()
        }
        .save(path)
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointMeta)> {
        let net = load_checkpoint(path)?;
        let meta = CheckpointMeta::load(path)?;
        let kind = ModelKind::from_tag(meta.model.as_deref().unwrap_or("qubo"))?;
        let topology = match &meta.topology {
            Some(text) => Topology::parse_adjacency(text)?,
            None => return Err(Error::Parse("checkpoint metadata lacks a topology".into())),
        };
        Ok((Model::new(kind, topology, net)?, meta))
    }
}
