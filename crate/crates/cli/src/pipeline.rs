//! Dataset generation, model evaluation and CSV helpers shared by the
//! subcommands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use quant::metrics::{geodesic_so2, geodesic_so3, procrustes3d};
use quant::problems::geometry::euler_zyx;
use quant::problems::graph::{
    direct_solve, gen_randgraph_set, instance_permutation, instance_w, load_keypoint_pairs, willow_instance,
    ExpKernel, DEFAULT_TAU, MAX_DIRECT_K, RANDGRAPH, WILLOW,
};
use quant::problems::psr2d::{decode_angle2d, gen_contours, gen_psr2d_set, instance_angle, Psr2dSampling, PSR2D};
use quant::problems::rot3d::{
    decode_euler, decode_euler_angle, gen_clouds3d_with, gen_rot3d_set, instance_angles, instance_pair, rot3d_encode,
    three_stage_infer, DEFAULT_CLOUD_POINTS, ROT3D,
};
use quant::problems::{corrupt_matches, encode_permutation, project_to_permutation, ProblemInstance};
use quant::qubo::{chimera_cell, pegasus_tile_default, Topology};
use quant::rng;
use quant::solvers::SaParams;
use quant::training::{Model, Sampler, SolverChoice};
use quant::BitString;

use crate::error::{runtime, usage, CliResult};

/// Everything needed to synthesize one dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenSpec {
    pub problem: String,
    pub k: usize,
    pub count: usize,
    pub shapes: usize,
    pub points: Option<usize>,
    pub noise: f64,
    pub stage: Option<usize>,
    /// Fraction of 3D correspondences to permute.
    pub corrupt: f64,
    pub keypoints: Option<PathBuf>,
    pub tau: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            problem: RANDGRAPH.into(),
            k: 4,
            count: 141,
            shapes: 50,
            points: None,
            noise: 0.0,
            stage: None,
            corrupt: 0.0,
            keypoints: None,
            tau: DEFAULT_TAU,
        }
    }
}

pub fn generate(spec: &GenSpec, seed: u64) -> CliResult<Vec<ProblemInstance>> {
    let shape_seed = rng::substream_seed(seed, "shapes");
    let inst_seed = rng::substream_seed(seed, rng::stream::DATA);
    let noise_seed = rng::substream_seed(seed, rng::stream::NOISE);
    if spec.corrupt != 0.0 && (spec.problem != ROT3D || spec.stage.is_some()) {
        return Err(usage("match corruption applies to full rot3d instances only"));
    }
    let out = match spec.problem.as_str() {
        RANDGRAPH => gen_randgraph_set(spec.k, spec.count, inst_seed)?,
        PSR2D => {
            let shapes = gen_contours(spec.shapes, shape_seed);
            let mut sampling = Psr2dSampling {
                noise_pct: spec.noise,
                ..Psr2dSampling::default()
            };
            if let Some(p) = spec.points {
                sampling.points = p;
            }
            gen_psr2d_set(&shapes, spec.count, (0.0, PI / 3.0), sampling, inst_seed)?
        }
        ROT3D => {
            let clouds = gen_clouds3d_with(spec.shapes, spec.points.unwrap_or(DEFAULT_CLOUD_POINTS), shape_seed);
            let clean = gen_rot3d_set(&clouds, spec.count, spec.stage, inst_seed)?;
            if spec.corrupt > 0.0 {
                clean
                    .iter()
                    .enumerate()
                    .map(|(i, inst)| {
                        let pair = corrupt_matches(&instance_pair(inst)?, spec.corrupt, rng::child_seed(noise_seed, i as u64))?;
                        rot3d_encode(&pair, instance_angles(inst)?)
                    })
                    .collect::<quant::Result<_>>()?
            } else {
                clean
            }
        }
        WILLOW => {
            let path = spec
                .keypoints
                .as_ref()
                .ok_or_else(|| usage("willow data needs --keypoints <file>"))?;
            let kernel = ExpKernel::default();
            load_keypoint_pairs(path)?
                .iter()
                .map(|pair| willow_instance(pair, spec.tau, &kernel))
                .collect::<quant::Result<_>>()?
        }
        other => return Err(usage(format!("unknown problem type `{other}`"))),
    };
    Ok(out)
}

/// The QUBO mask named by `spec` for `n` variables.
pub fn resolve_topology(spec: &str, n: usize) -> CliResult<Topology> {
    let t = match spec {
        "dense" => Topology::dense(n),
        "diagonal" => Topology::diagonal(n),
        "chimera" => chimera_cell(),
        "pegasus" => pegasus_tile_default(),
        path => Topology::load(Path::new(path))?,
    };
    if t.n() != n {
        return Err(runtime(format!("topology `{spec}` has {} qubits but solutions have {n} bits", t.n())));
    }
    Ok(t)
}

/// How predictions are produced.
pub enum Predictor<'a> {
    Model(&'a Model<f64>),
    /// One model per Euler stage, run through the three-stage pipeline.
    Staged(&'a [Model<f64>]),
    /// Exhaustive QAP search on the instance's `W`.
    Direct,
    Procrustes,
}

impl Predictor<'_> {
    pub fn method(&self) -> String {
        match self {
            Predictor::Model(m) => method_name(m),
            Predictor::Staged(ms) => method_name(&ms[0]),
            Predictor::Direct => "direct".into(),
            Predictor::Procrustes => "procrustes".into(),
        }
    }
}

fn method_name(m: &Model<f64>) -> String {
    match m.kind().tag() {
        "qubo" => "ours".into(),
        other => other.into(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub solver: SolverChoice,
    pub sa: SaParams,
    pub project: bool,
}

pub struct Evaluation {
    pub metric: &'static str,
    pub values: Vec<f64>,
    /// Predicted bitstrings, when the method produces them.
    pub predictions: Option<Vec<BitString>>,
}

fn is_graph(problem: &str) -> bool {
    problem == RANDGRAPH || problem == WILLOW
}

fn stage_of(inst: &ProblemInstance) -> Option<usize> {
    inst.meta.get("stage").and_then(|v| v.as_u64()).map(|v| v as usize)
}

pub fn metric_name(inst: &ProblemInstance) -> &'static str {
    match inst.problem.as_str() {
        p if is_graph(p) => "accuracy",
        PSR2D => "angle_error_deg",
        ROT3D if stage_of(inst).is_some() => "angle_error_deg",
        _ => "rotation_error_deg",
    }
}

/// Per-instance score of `bits` against the ground truth of `inst`.
fn score(inst: &ProblemInstance, bits: &BitString, project: bool) -> CliResult<f64> {
    Ok(match inst.problem.as_str() {
        p if is_graph(p) => {
            let k = instance_permutation(inst)?.len();
            let bits = if project {
                project_to_permutation(bits, k)?.into_bits()
            } else {
                bits.clone()
            };
            if bits == inst.x_hat {
                100.0
            } else {
                0.0
            }
        }
        PSR2D => geodesic_so2(decode_angle2d(bits)?, instance_angle(inst)?),
        ROT3D => {
            let truth = instance_angles(inst)?;
            match stage_of(inst) {
                Some(s) => geodesic_so2(decode_euler_angle(s, bits)?, truth[s]),
                None => {
                    let a = decode_euler(bits)?;
                    geodesic_so3(&euler_zyx(a[0], a[1], a[2]), &euler_zyx(truth[0], truth[1], truth[2]))?
                }
            }
        }
        other => return Err(runtime(format!("no metric for problem type `{other}`"))),
    })
}

fn rotation_error(inst: &ProblemInstance, estimate: &quant::problems::geometry::Mat3) -> CliResult<f64> {
    let a = instance_angles(inst)?;
    Ok(geodesic_so3(estimate, &euler_zyx(a[0], a[1], a[2]))?)
}

pub fn evaluate(instances: &[ProblemInstance], predictor: &Predictor, opts: &EvalOptions) -> CliResult<Evaluation> {
    let first = instances.first().ok_or_else(|| runtime("dataset is empty"))?;
    let problem = first.problem.as_str();
    let metric = metric_name(first);
    let seed_of = |i: usize| rng::child_seed(opts.sa.seed, i as u64);
    match predictor {
        Predictor::Model(model) => {
            let sampler = Sampler::for_size(opts.solver, model.n(), opts.sa);
            let preds: Vec<BitString> = instances
                .par_iter()
                .enumerate()
                .map(|(i, inst)| model.predict(&inst.p, &sampler, seed_of(i)))
                .collect::<quant::Result<_>>()?;
            let values = instances
                .iter()
                .zip(&preds)
                .map(|(inst, b)| score(inst, b, opts.project))
                .collect::<CliResult<_>>()?;
            Ok(Evaluation {
                metric,
                values,
                predictions: Some(preds),
            })
        }
        Predictor::Staged(models) => {
            if problem != ROT3D || models.len() != 3 || stage_of(first).is_some() {
                return Err(usage("three-stage evaluation needs three checkpoints and a full rot3d dataset"));
            }
            let samplers: Vec<Sampler> = models
                .iter()
                .map(|m| Sampler::for_size(opts.solver, m.n(), opts.sa))
                .collect();
            let values = instances
                .par_iter()
                .enumerate()
                .map(|(i, inst)| {
                    let pair = instance_pair(inst)?;
                    let est = three_stage_infer(
                        |stage, p| models[stage].predict(p, &samplers[stage], rng::child_seed(seed_of(i), stage as u64)),
                        &pair,
                    )?;
                    rotation_error(inst, &est.rotation)
                })
                .collect::<CliResult<_>>()?;
            Ok(Evaluation {
                metric: "rotation_error_deg",
                values,
                predictions: None,
            })
        }
        Predictor::Direct => {
            if !is_graph(problem) {
                return Err(usage("the direct baseline applies to graph matching only"));
            }
            let preds: Vec<BitString> = instances
                .par_iter()
                .map(|inst| {
                    let k = instance_permutation(inst)?.len();
                    if k > MAX_DIRECT_K {
                        return Err(quant::Error::Budget {
                            solver: "direct QAP search",
                            size: k,
                            limit: MAX_DIRECT_K,
                        });
                    }
                    Ok(encode_permutation(&direct_solve(&instance_w(inst)?, k)?)?.into_bits())
                })
                .collect::<quant::Result<_>>()?;
            let values = instances
                .iter()
                .zip(&preds)
                .map(|(inst, b)| score(inst, b, false))
                .collect::<CliResult<_>>()?;
            Ok(Evaluation {
                metric,
                values,
                predictions: Some(preds),
            })
        }
        Predictor::Procrustes => {
            if problem != ROT3D || stage_of(first).is_some() {
                return Err(usage("the procrustes baseline needs a full rot3d dataset"));
            }
            let values = instances
                .par_iter()
                .map(|inst| rotation_error(inst, &procrustes3d(&instance_pair(inst)?)?))
                .collect::<CliResult<_>>()?;
            Ok(Evaluation {
                metric: "rotation_error_deg",
                values,
                predictions: None,
            })
        }
    }
}

/// Prefixes every CSV row with the producing seed and config hash.
pub fn with_provenance(csv: &str, seed: u64, hash: &str) -> String {
    let mut out = String::with_capacity(csv.len() + 80 * csv.lines().count());
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            out.push_str("seed,config_hash,");
        } else {
            out.push_str(&format!("{seed},{hash},"));
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Joins `name` onto `dir`, refusing anything that would leave `dir`.
pub fn output_path(dir: &Path, name: &str) -> CliResult<PathBuf> {
    let p = Path::new(name);
    let plain = p.components().count() == 1 && matches!(p.components().next(), Some(std::path::Component::Normal(_)));
    if !plain {
        return Err(usage(format!("output name `{name}` must be a plain file name")));
    }
    Ok(dir.join(p))
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}
