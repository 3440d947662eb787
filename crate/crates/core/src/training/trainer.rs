use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::losses::{loss_mlp, total_loss, LossWeights};
use super::model::{to_scalar, Model, ModelKind, Sampler, SolverChoice};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::nn::{adam_step, build_arch, Activation, AdamState, Gradients, InputScaler, MlpParams};
use crate::problems::{validate_dataset, ProblemInstance};
use crate::qubo::{QuboMatrix, Topology};
use crate::rng;
use crate::scalar::Scalar;
use crate::solvers::{QuboSampler, SaParams};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub problem_type: String,
    pub model: ModelKind,
    pub layers: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub solver: SolverChoice,
    pub sa: SaParams,
    pub weights: LossWeights,
    pub seed: u64,
    /// Fit a per-feature standardization of `p` on the training set.
    pub standardize: bool,
    /// Evaluate test accuracy every this many epochs (0 = only after the last).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            problem_type: String::new(),
            model: ModelKind::Qubo,
            layers: 5,
            hidden: 78,
            lr: 1e-3,
            batch_size: 141,
            epochs: 150,
            solver: SolverChoice::Auto,
            sa: SaParams::default(),
            weights: LossWeights::default(),
            seed: 0,
            standardize: true,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.weights.unique < 0.0 || self.weights.mlp < 0.0 {
            return bad("loss weights must be non-negative".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be finite and >= 0", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.layers < 2 || self.hidden == 0 {
            return bad(format!("need L >= 2 and H >= 1, got L={} H={}", self.layers, self.hidden));
        }
        self.sa.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean over instances of the total loss and its components. For the
    /// direct-regression model `gap` holds the ℓ1 term and `unique` is zero.
    pub loss: f64,
    pub gap: f64,
    pub unique: f64,
    pub mlp: f64,
    /// Exact-match rate (%) of the in-loop predictions, before each update.
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub unique_absent: usize,
    pub unique_clamped: usize,
    pub solver_calls: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn solver_calls(&self) -> usize {
        self.epochs.iter().map(|e| e.solver_calls).sum()
    }

    pub fn seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }

    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.test_accuracy)
    }

    pub const CSV_HEADER: &'static str =
        "epoch,loss,gap,unique,mlp,train_accuracy,test_accuracy,unique_absent,unique_clamped,solver_calls,seconds";

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for e in &self.epochs {
            let test = e.test_accuracy.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{:.3}",
                e.epoch, e.loss, e.gap, e.unique, e.mlp, e.train_accuracy, test, e.unique_absent, e.unique_clamped,
                e.solver_calls, e.seconds
            )?;
        }
        Ok(())
    }
}

struct Outcome<T> {
    grads: Gradients<T>,
    loss: [f64; 4],
    correct: bool,
    absent: bool,
    clamped: bool,
    solved: bool,
}

/// A freshly initialized model for `config` on instances of width `p_dim`.
pub fn init_model<T: Scalar>(
    config: &TrainConfig,
    p_dim: usize,
    topology: &Topology,
    scaler: Option<InputScaler<T>>,
) -> Result<Model<T>> {
    let out = Model::<T>::output_width(config.model, topology);
    let mut specs = build_arch(p_dim, out, config.layers, config.hidden)?;
    if config.model == ModelKind::Pure {
        if let Some(last) = specs.last_mut() {
            last.activation = Activation::None;
        }
    }
    let mut init = rng::substream(config.seed, rng::stream::INIT);
    let mut net = MlpParams::glorot(p_dim, specs, &mut init)?;
    if let Some(s) = scaler {
        net = net.with_scaler(s)?;
    }
    Model::new(config.model, topology.clone(), net)
}

fn instance_step<T: Scalar>(
    model: &Model<T>,
    inst: &ProblemInstance,
    sampler: &dyn QuboSampler<T>,
    weights: LossWeights,
    seed: u64,
) -> Result<Outcome<T>> {
    let net = model.net();
    let trace = net.forward(&to_scalar(&inst.p))?;
    let f = |v: T| v.to_f64_lossy();
    match model.kind() {
        // Targets are spins `2x̂ − 1` so that the zero threshold sits midway.
        ModelKind::Pure => {
            let out = trace.output();
            let n = T::of_usize(out.len());
            let mut l1 = T::zero();
            let d_out: Vec<T> = out
                .iter()
                .zip(inst.x_hat.iter())
                .map(|(&o, b)| {
                    let d = o - if b { T::one() } else { -T::one() };
                    l1 += d.abs() / n;
                    if d > T::zero() {
                        T::one() / n
                    } else if d < T::zero() {
                        -T::one() / n
                    } else {
                        T::zero()
                    }
                })
                .collect();
            let (mlp, d_feat) = loss_mlp(&trace);
            let lm = T::from_f64_lossy(weights.mlp);
            let d_feat: Vec<Vec<T>> = d_feat.into_iter().map(|g| g.into_iter().map(|v| lm * v).collect()).collect();
            let pred = BitString::from_bools(out.iter().map(|&v| v > T::zero()).collect());
            Ok(Outcome {
                grads: net.backward(&trace, &d_out, Some(&d_feat))?,
                loss: [f(l1 + lm * mlp), f(l1), 0.0, f(mlp)],
                correct: pred == inst.x_hat,
                absent: false,
                clamped: false,
                solved: false,
            })
        }
        ModelKind::Qubo | ModelKind::Diag => {
            let a = QuboMatrix::from_free_parameters(model.topology(), model.index(), trace.output())?;
            let res = sampler.sample(&a, seed)?;
            let tl = total_loss(
                &a,
                model.index(),
                &trace,
                &inst.x_hat,
                Some(res.best()),
                res.second_best(),
                weights,
            )?;
            Ok(Outcome {
                grads: net.backward(&trace, &tl.d_out, Some(&tl.d_features))?,
                loss: [f(tl.value), f(tl.gap), f(tl.unique), f(tl.mlp)],
                correct: *res.best() == inst.x_hat,
                absent: tl.unique_absent,
                clamped: tl.unique_clamped,
                solved: true,
            })
        }
    }
}

/// Trains a fresh model; see [`train_with`].
pub fn train<T: Scalar>(
    train_set: &[ProblemInstance],
    test_set: Option<&[ProblemInstance]>,
    topology: &Topology,
    config: &TrainConfig,
) -> Result<(Model<T>, TrainReport)> {
    train_with(train_set, test_set, topology, config, &mut |_| {})
}

/// Mini-batch training with Adam. Each instance's QUBO is solved with the
/// current parameters, the losses are taken with the solver outputs held
/// fixed, and the batch-mean gradient is applied. Instances within a batch
/// are processed in parallel and reduced in a fixed order, so results do not
/// depend on the thread count.
pub fn train_with<T: Scalar>(
    train_set: &[ProblemInstance],
    test_set: Option<&[ProblemInstance]>,
    topology: &Topology,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<(Model<T>, TrainReport)> {
    config.validate()?;
    validate_dataset(train_set)?;
    let n = train_set[0].x_hat.len();
    if topology.n() != n {
        return Err(Error::Dimension {
            what: "topology size",
            expected: n,
            got: topology.n(),
        });
    }
    if let Some(test) = test_set {
        if let Some(bad) = test.iter().find(|t| t.p.len() != train_set[0].p.len() || t.x_hat.len() != n) {
            return Err(Error::Shape(format!(
                "test instance with p length {} and {} bits does not match training data",
                bad.p.len(),
                bad.x_hat.len()
            )));
        }
    }
    let scaler = if config.standardize {
        let s = InputScaler::<f64>::fit(train_set.iter().map(|i| i.p.as_slice()))?;
        Some(InputScaler {
            mean: to_scalar(&s.mean),
            scale: to_scalar(&s.scale),
        })
    } else {
        None
    };
    let mut model = init_model::<T>(config, train_set[0].p.len(), topology, scaler)?;
    let sampler = Sampler::for_size(config.solver, n, config.sa);
    let mut adam = AdamState::new(model.net());
    let mut step = 0u64;
    let shuffle_seed = rng::substream_seed(config.seed, rng::stream::SHUFFLE);
    let sa_seed = rng::substream_seed(config.seed, rng::stream::SA);
    let eval_seed = rng::substream_seed(config.seed, "eval");
    let count = train_set.len();
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut rng::from_seed(rng::child_seed(shuffle_seed, epoch as u64)));
        let mut losses = vec![[0.0f64; 4]; count];
        let mut correct = 0usize;
        let (mut absent, mut clamped, mut calls) = (0usize, 0usize, 0usize);

        for batch in order.chunks(config.batch_size) {
            let current = &model;
            let outcomes: Vec<Outcome<T>> = batch
                .par_iter()
                .map(|&i| {
                    let seed = rng::child_seed(sa_seed, (epoch * count + i) as u64);
                    instance_step(current, &train_set[i], &sampler, config.weights, seed)
                })
                .collect::<Result<_>>()?;
            let mut grads = Gradients::zeros_like(model.net());
            for (&i, o) in batch.iter().zip(&outcomes) {
                grads.add_assign(&o.grads);
                losses[i] = o.loss;
                correct += o.correct as usize;
                absent += o.absent as usize;
                clamped += o.clamped as usize;
                calls += o.solved as usize;
            }
            grads.scale(T::one() / T::of_usize(batch.len()));
            if !grads.is_finite() {
                return Err(Error::NonFinite("gradient"));
            }
            step += 1;
            adam_step(model.net_mut(), &grads, &mut adam, config.lr, step);
            if !model.net().all_finite() {
                return Err(Error::NonFinite("network parameters"));
            }
        }

        let mut mean = [0.0f64; 4];
        for l in &losses {
            for k in 0..4 {
                mean[k] += l[k];
            }
        }
        mean.iter_mut().for_each(|v| *v /= count as f64);
        let last = epoch + 1 == config.epochs;
        let due = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        let test_accuracy = match test_set {
            Some(test) if !test.is_empty() && (due || last) => Some(model.accuracy(test, &sampler, eval_seed)?),
            _ => None,
        };
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: mean[0],
            gap: mean[1],
            unique: mean[2],
            mlp: mean[3],
            train_accuracy: 100.0 * correct as f64 / count as f64,
            test_accuracy,
            unique_absent: absent,
            unique_clamped: clamped,
            solver_calls: calls,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok((model, report))
}
