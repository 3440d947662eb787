use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use quant::metrics::EvalReport;
use quant::nn::CheckpointMeta;
use quant::problems::permutation::{decode_permutation, project_to_permutation};
use quant::problems::{load_dataset, save_dataset, DatasetHeader, ProblemInstance};
use quant::qubo::parse_qubo;
use quant::solvers::{exhaustive_solve_with, hamming_histogram, simulated_anneal, ExhaustiveOptions, SaParams};
use quant::training::{train_with, Model, ModelKind, SolverChoice, TrainReport};
use quant::{rng, BitString};

use crate::config::{hash_text, ExperimentConfig};
use crate::error::{runtime, usage, CliResult};
use crate::pipeline::{
    ensure_dir, evaluate, generate, output_path, resolve_topology, with_provenance, write_file, EvalOptions, GenSpec,
    Predictor,
};
use crate::report::{aggregate, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Auto,
    Exhaustive,
    Sa,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverChoice::Auto,
            SolverArg::Exhaustive => SolverChoice::Exhaustive,
            SolverArg::Sa => SolverChoice::Sa,
        }
    }
}

// ------------------------------------------------------------------ gen-data

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// randgraph, psr2d, rot3d or willow.
    #[arg(long)]
    pub problem: String,
    #[arg(long, default_value_t = 141)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Graph size (randgraph).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Uniform noise on the 2D reference, in percent of the extent (psr2d).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of correspondences to permute (rot3d, full instances).
    #[arg(long, default_value_t = 0.0)]
    pub corrupt: f64,
    /// Number of source shapes or clouds (psr2d, rot3d).
    #[arg(long, default_value_t = 50)]
    pub shapes: usize,
    /// Points per outline or cloud.
    #[arg(long)]
    pub points: Option<usize>,
    /// Emit single-stage instances for this Euler angle (rot3d).
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..3))]
    pub stage: Option<u8>,
    /// Keypoint pair file (willow).
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Appearance weight of the Willow matrix.
    #[arg(long, default_value_t = quant::problems::graph::DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// File name inside the output directory; defaults to `<problem>.jsonl`.
    #[arg(long)]
    pub name: Option<String>,
}

pub fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    let spec = GenSpec {
        problem: a.problem.clone(),
        k: a.k,
        count: a.count,
        shapes: a.shapes,
        points: a.points,
        noise: a.noise,
        stage: a.stage.map(usize::from),
        corrupt: a.corrupt,
        keypoints: a.keypoints.clone(),
        tau: a.tau,
    };
    let name = a.name.clone().unwrap_or_else(|| format!("{}.jsonl", a.problem));
    let path = output_path(&a.out, &name)?;
    let data = generate(&spec, a.seed)?;
    let header = DatasetHeader {
        dataset: a.problem.clone(),
        seed: a.seed,
        config_hash: hash_text(&serde_json::to_string(&spec).map_err(|e| runtime(e.to_string()))?),
        count: data.len(),
    };
    ensure_dir(&a.out)?;
    save_dataset(&path, Some(&header), &data)?;
    println!("{} instances -> {}", data.len(), path.display());
    Ok(())
}

// ------------------------------------------------------------------ train

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

pub const CHECKPOINT_NAME: &str = "model.qant";

/// Training and test sets named by `cfg`, loaded or generated.
pub fn experiment_data(cfg: &ExperimentConfig) -> CliResult<(Vec<ProblemInstance>, Vec<ProblemInstance>)> {
    let p = &cfg.problem;
    let spec = |count, shapes| GenSpec {
        problem: p.kind.clone(),
        k: p.k,
        count,
        shapes,
        points: p.points,
        noise: p.noise,
        stage: p.stage,
        ..GenSpec::default()
    };
    let train = match &p.train_data {
        Some(path) => load_dataset(path)?.1,
        None => generate(&spec(p.count, p.shapes), rng::substream_seed(cfg.seed, "train"))?,
    };
    let test = match &p.test_data {
        Some(path) => load_dataset(path)?.1,
        None if p.test_count == 0 => Vec::new(),
        None => generate(&spec(p.test_count, p.test_shapes), rng::substream_seed(cfg.seed, "test"))?,
    };
    if train.is_empty() {
        return Err(runtime("training set is empty"));
    }
    Ok((train, test))
}

fn train_one(
    cfg: &ExperimentConfig,
    kind: ModelKind,
    layers: usize,
    hidden: usize,
    train: &[ProblemInstance],
    test: &[ProblemInstance],
    quiet: bool,
) -> CliResult<(Model<f64>, TrainReport)> {
    let topology = resolve_topology(&cfg.model.topology, train[0].x_hat.len())?;
    let tc = cfg.train_config(kind, layers, hidden);
    let test = (!test.is_empty()).then_some(test);
    let mut progress = |e: &quant::training::EpochStats| {
        if !quiet {
            let acc = e.test_accuracy.map(|a| format!(", test {a:.1}%")).unwrap_or_default();
            eprintln!("epoch {:>4}: loss {:.5}, train {:.1}%{acc} ({:.1}s)", e.epoch + 1, e.loss, e.train_accuracy, e.seconds);
        }
    };
    Ok(train_with::<f64>(train, test, &topology, &tc, &mut progress)?)
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let (train, test) = experiment_data(&cfg)?;
    let (model, report) = train_one(&cfg, cfg.model_kind()?, cfg.model.layers, cfg.model.hidden, &train, &test, a.quiet)?;
    let hash = cfg.hash();
    ensure_dir(&out)?;
    let ckpt = output_path(&out, CHECKPOINT_NAME)?;
    let meta = CheckpointMeta {
        seed: cfg.seed,
        epoch: cfg.train.epochs,
        problem_type: cfg.problem.kind.clone(),
        config_hash: Some(hash.clone()),
        ..CheckpointMeta::default()
    };
    model.save(&ckpt, &meta)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| runtime(e.to_string()))?;
    let csv = with_provenance(&String::from_utf8_lossy(&csv), cfg.seed, &hash);
    write_file(&output_path(&out, "train_report.csv")?, csv.as_bytes())?;
    println!("checkpoint -> {}", ckpt.display());
    if let Some(acc) = report.final_test_accuracy() {
        println!("final test accuracy {acc:.2}%");
    }
    Ok(())
}

// ------------------------------------------------------------------ eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One checkpoint, or three (one per Euler stage) for staged rot3d.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// ours, diag, pure, direct or procrustes; defaults to the checkpoint's kind.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 100)]
    pub reads: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    /// Defaults to the checkpoint's training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Project graph-matching predictions onto permutations.
    #[arg(long)]
    pub project: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let (header, data) = load_dataset(&a.data)?;
    let method = a.method.as_deref();
    let classical = matches!(method, Some("direct") | Some("procrustes"));
    let mut models = Vec::new();
    let mut meta: Option<CheckpointMeta> = None;
    if classical {
        if !a.checkpoint.is_empty() {
            return Err(usage(format!("--method {} takes no checkpoint", method.unwrap_or_default())));
        }
    } else {
        if !(a.checkpoint.len() == 1 || a.checkpoint.len() == 3) {
            return Err(usage("give one checkpoint, or three for staged rotation estimation"));
        }
        for path in &a.checkpoint {
            let (m, md) = Model::<f64>::load(path)?;
            meta.get_or_insert(md);
            models.push(m);
        }
        if let Some(want) = method {
            let kind = ModelKind::from_tag(want).map_err(|e| usage(e.to_string()))?;
            if models.iter().any(|m| m.kind() != kind) {
                return Err(usage(format!("checkpoint kind does not match --method {want}")));
            }
        }
    }
    let predictor = match (method, models.len()) {
        (Some("direct"), _) => Predictor::Direct,
        (Some("procrustes"), _) => Predictor::Procrustes,
        (_, 3) => Predictor::Staged(&models),
        _ => Predictor::Model(&models[0]),
    };
    let (seed, hash) = match (&meta, &header) {
        (Some(m), _) => (m.seed, m.config_hash.clone().unwrap_or_else(|| "none".into())),
        (None, Some(h)) => (h.seed, h.config_hash.clone()),
        (None, None) => (0, "none".into()),
    };
    let eval_seed = rng::substream_seed(a.seed.unwrap_or(seed), "eval");
    let opts = EvalOptions {
        solver: a.solver.into(),
        sa: SaParams {
            num_reads: a.reads,
            sweeps: a.sweeps,
            seed: eval_seed,
            ..SaParams::default()
        },
        project: a.project,
    };
    let ev = evaluate(&data, &predictor, &opts)?;
    let report = EvalReport::new(&predictor.method(), ev.metric, ev.values);

    ensure_dir(&a.out)?;
    let summary = format!("{}\n{}\n", EvalReport::SUMMARY_HEADER, report.summary_row());
    write_file(&output_path(&a.out, "eval_summary.csv")?, with_provenance(&summary, seed, &hash).as_bytes())?;
    let mut per = Vec::new();
    report.write_instances_csv(&mut per).map_err(|e| runtime(e.to_string()))?;
    write_file(
        &output_path(&a.out, "eval_instances.csv")?,
        with_provenance(&String::from_utf8_lossy(&per), seed, &hash).as_bytes(),
    )?;
    if let Some(preds) = &ev.predictions {
        let truths: Vec<BitString> = data.iter().map(|d| d.x_hat.clone()).collect();
        let hist = hamming_histogram(preds, &truths)?;
        let mut csv = String::from("distance,count\n");
        for (d, c) in hist.iter().enumerate() {
            let _ = writeln!(csv, "{d},{c}");
        }
        write_file(&output_path(&a.out, "hamming.csv")?, with_provenance(&csv, seed, &hash).as_bytes())?;
    }
    println!("{}", EvalReport::SUMMARY_HEADER);
    println!("{}", report.summary_row());
    Ok(())
}

// ------------------------------------------------------------------ solve

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// QUBO text file.
    #[arg(long)]
    pub qubo: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverArg::Exhaustive)]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 100)]
    pub reads: usize,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lowest-energy states kept by exhaustive search.
    #[arg(long, default_value_t = 2)]
    pub keep: usize,
    /// Also write `samples.csv` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn solve(a: &SolveArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.qubo).map_err(|e| runtime(format!("cannot read {}: {e}", a.qubo.display())))?;
    let q = parse_qubo::<f64>(&text)?;
    let result = match a.solver {
        SolverArg::Exhaustive | SolverArg::Auto => exhaustive_solve_with(
            &q,
            ExhaustiveOptions {
                keep: a.keep,
                ..ExhaustiveOptions::default()
            },
        )?,
        SolverArg::Sa => simulated_anneal(
            &q,
            &SaParams {
                num_reads: a.reads,
                sweeps: a.sweeps,
                seed: a.seed,
                ..SaParams::default()
            },
        )?,
    };
    let mut csv = String::from("bitstring,energy,count\n");
    for s in result.samples() {
        let _ = writeln!(csv, "{},{},{}", s.bits, s.energy, s.count);
    }
    print!("{csv}");
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_file(&output_path(dir, "samples.csv")?, csv.as_bytes())?;
    }
    Ok(())
}

// ------------------------------------------------------------------ project

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Bitstrings to project; read one per line from --input otherwise.
    #[arg(long)]
    pub bits: Vec<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: usize,
}

pub fn project(a: &ProjectArgs) -> CliResult<()> {
    let mut items = a.bits.clone();
    if let Some(path) = &a.input {
        let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
        items.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
    }
    if items.is_empty() {
        return Err(usage("nothing to project; pass --bits or --input"));
    }
    println!("input,projected,permutation,distance");
    for item in items {
        let bits: BitString = item.parse().map_err(|e: quant::Error| usage(e.to_string()))?;
        let projected = project_to_permutation(&bits, a.k)?;
        let perm = decode_permutation(projected.bits(), a.k);
        let perm: Vec<String> = perm.iter().map(usize::to_string).collect();
        println!("{bits},{},{},{}", projected.bits(), perm.join(" "), projected.bits().hamming(&bits)?);
    }
    Ok(())
}

// ------------------------------------------------------------------ report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Result CSVs from repeated runs.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Combine files produced by different configurations.
    #[arg(long)]
    pub force: bool,
    /// Also write `report.csv` and `report.md` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn report(a: &ReportArgs) -> CliResult<()> {
    let tables = a.files.iter().map(|f| Table::load(f)).collect::<CliResult<Vec<_>>>()?;
    let agg = aggregate(&tables, a.force)?;
    print!("{}", agg.markdown);
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_file(&output_path(dir, "report.csv")?, agg.table.to_csv().as_bytes())?;
        write_file(&output_path(dir, "report.md")?, agg.markdown.as_bytes())?;
    }
    Ok(())
}

// ------------------------------------------------------------------ grid

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Layer counts; defaults to the config's [grid] block.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Hidden widths; defaults to the config's [grid] block.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

pub const GRID_METHODS: [(ModelKind, &str); 3] = [(ModelKind::Qubo, "ours"), (ModelKind::Diag, "diag"), (ModelKind::Pure, "pure")];

pub fn grid(a: &GridArgs) -> CliResult<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let pick = |flag: &Vec<usize>, conf: Option<&Vec<usize>>, fallback: usize| -> Vec<usize> {
        if !flag.is_empty() {
            flag.clone()
        } else {
            conf.cloned().unwrap_or_else(|| vec![fallback])
        }
    };
    let layers = pick(&a.layers, cfg.grid.as_ref().map(|g| &g.layers), cfg.model.layers);
    let hidden = pick(&a.hidden, cfg.grid.as_ref().map(|g| &g.hidden), cfg.model.hidden);
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let (train, test) = experiment_data(&cfg)?;
    let eval_set = if test.is_empty() { &train } else { &test };
    let opts = EvalOptions {
        solver: cfg.eval.solver,
        sa: cfg.eval_sa(rng::substream_seed(cfg.seed, "eval")),
        project: cfg.eval.project,
    };

    let mut csv = String::from("layers,hidden,metric");
    for (_, name) in GRID_METHODS {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for &l in &layers {
        for &h in &hidden {
            let mut row = Vec::new();
            let mut metric = "";
            for (kind, name) in GRID_METHODS {
                if !a.quiet {
                    eprintln!("grid cell L={l} H={h}: {name}");
                }
                let (model, _) = train_one(&cfg, kind, l, h, &train, &[], a.quiet)?;
                let ev = evaluate(eval_set, &Predictor::Model(&model), &opts)?;
                metric = ev.metric;
                row.push(ev.values.iter().sum::<f64>() / ev.values.len() as f64);
            }
            let _ = write!(csv, "{l},{h},{metric}");
            for v in row {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
    }
    let csv = with_provenance(&csv, cfg.seed, &cfg.hash());
    ensure_dir(&out)?;
    let path = output_path(&out, "grid.csv")?;
    write_file(&path, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}
