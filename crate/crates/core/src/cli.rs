//! The `lsplm` command line: `gen`, `train`, `predict`, `eval` and `sweep`.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{evaluate, scores, EvalReport};
use crate::model::{load_model, save_model, Hyperparams, Theta};
use crate::optimizer::{train, TrainReport};
use crate::parallel::{ParallelCtx, DEFAULT_SHARDS};
use crate::sparse_data::{
    fmt_real, gen_synthetic, group_by_common, load_dataset, load_grouped, looks_grouped,
    write_dataset, Dataset, FeatureId, GroupedDataset, Pattern, SynthSpec,
};

#[derive(Debug, Parser)]
#[command(name = "lsplm", version, about = "Piece-wise linear classifier for sparse data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-dimensional dataset.
    Gen(GenArgs),
    /// Fit a model and write it along with a per-iteration trace.
    Train(TrainArgs),
    /// Write one probability per input line.
    Predict(PredictArgs),
    /// Print AUC, mean log loss and sparsity of a model on labeled data.
    Eval(EvalArgs),
    /// Grid search over the two penalty weights.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// `xor` or `band`.
    #[arg(long, default_value = "xor")]
    pub pattern: Pattern,
    #[arg(long, value_parser = positive_usize)]
    pub n: usize,
    /// Probability of flipping each label.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by every command that reads training data.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Training data, plain or grouped (auto-detected).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model dimension; defaults to one past the largest feature id.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Feature ids shared by consecutive instances, e.g. `3,4,5`. Plain input
    /// only; runs of instances agreeing on these ids are evaluated as one
    /// block.
    #[arg(long, value_delimiter = ',')]
    pub common_ids: Option<Vec<FeatureId>>,
    /// Worker threads; defaults to the available hardware parallelism.
    /// Results do not depend on this value.
    #[arg(long, value_parser = positive_usize)]
    pub workers: Option<usize>,
}

/// Training hyperparameters other than the penalty weights. The loss is summed, not averaged, over
/// instances, so useful penalty weights grow with the data size.
#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Number of regions.
    #[arg(long, default_value_t = 12, value_parser = positive_usize)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub lbfgs_mem: usize,
    /// Dividers start uniform in `[-s, s]`; 0 starts from the zero model.
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
}

impl HyperArgs {
    pub fn to_hyper(&self, beta: f64, lambda: f64) -> Hyperparams {
        Hyperparams {
            m: self.m,
            beta,
            lambda,
            lbfgs_memory: self.lbfgs_mem,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            init_scale: self.init_scale,
            ..Hyperparams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// L1 penalty weight.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// L2,1 (per-feature group) penalty weight.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Trace file; defaults to the model path with `.trace` appended.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Print a single JSON object instead of `key=value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Validation data.
    #[arg(long)]
    pub valid: PathBuf,
    /// Comma-separated L1 weights.
    #[arg(long = "beta", value_delimiter = ',', default_value = "0.01,0.1,1,10")]
    pub betas: Vec<f64>,
    /// Comma-separated L2,1 weights.
    #[arg(long = "lambda", value_delimiter = ',', default_value = "0.01,0.1,1,10")]
    pub lambdas: Vec<f64>,
}

fn positive_usize(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a plain dataset, flattening grouped files.
pub fn read_plain(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if looks_grouped(&text) {
        Ok(load_grouped(text.as_bytes())?.flatten())
    } else {
        load_dataset(text.as_bytes())
    }
}

/// Reads training data as blocks: grouped files as written, plain files
/// grouped on `common_ids` when given, one instance per block otherwise.
pub fn read_training(args: &DataArgs) -> Result<GroupedDataset> {
    let text = fs::read_to_string(&args.input).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", args.input.display())))
    })?;
    let data = if looks_grouped(&text) {
        if args.common_ids.is_some() {
            return Err(Error::InvalidArgument(
                "--common-ids applies to plain input only; this file is already grouped".into(),
            ));
        }
        load_grouped(text.as_bytes())?
    } else {
        let plain = load_dataset(text.as_bytes())?;
        match &args.common_ids {
            Some(ids) => group_by_common(&plain, &ids.iter().copied().collect::<BTreeSet<_>>()),
            None => plain.ungrouped(),
        }
    };
    match args.dim {
        Some(dim) => data.with_dim(dim),
        None => Ok(data),
    }
}

fn context(data: &GroupedDataset, workers: Option<usize>) -> Result<ParallelCtx> {
    let workers = workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    ParallelCtx::new(data, DEFAULT_SHARDS, workers)
}

pub fn write_trace(mut sink: impl Write, report: &TrainReport) -> Result<()> {
    writeln!(sink, "k objective step nnz_params nnz_features quasi_newton")?;
    for r in &report.iterations {
        writeln!(
            sink,
            "{} {} {} {} {} {}",
            r.k,
            fmt_real(r.objective),
            fmt_real(r.step),
            r.nnz_params,
            r.nnz_features,
            u8::from(r.used_quasi_newton)
        )?;
    }
    Ok(())
}

pub fn cmd_gen(args: &GenArgs, out: &mut impl Write) -> Result<()> {
    let data = gen_synthetic(&SynthSpec {
        n: args.n,
        noise: args.noise,
        pattern: args.pattern,
        seed: args.seed,
    })?;
    let mut sink = create(&args.out)?;
    write_dataset(&mut sink, &data)?;
    sink.flush()?;
    writeln!(out, "n={} dim={}", data.len(), data.dim)?;
    Ok(())
}

fn fit(data: &GroupedDataset, hyper: &Hyperparams, workers: Option<usize>) -> Result<(Theta, TrainReport)> {
    hyper.validate()?;
    train(&context(data, workers)?, hyper)
}

pub fn cmd_train(args: &TrainArgs, out: &mut impl Write) -> Result<()> {
    let data = read_training(&args.data)?;
    let (theta, report) = fit(&data, &args.hyper.to_hyper(args.beta, args.lambda), args.data.workers)?;

    let mut sink = create(&args.model)?;
    save_model(&theta, &mut sink)?;
    sink.flush()?;
    let trace_path = args.trace.clone().unwrap_or_else(|| {
        let mut p = args.model.clone().into_os_string();
        p.push(".trace");
        p.into()
    });
    let mut sink = create(&trace_path)?;
    write_trace(&mut sink, &report)?;
    sink.flush()?;

    let last = report.iterations.last().expect("report has the initial record");
    writeln!(out, "iterations={}", last.k)?;
    writeln!(out, "termination={}", report.termination.as_str())?;
    writeln!(out, "objective={}", fmt_real(last.objective))?;
    writeln!(out, "nnz_params={}", last.nnz_params)?;
    writeln!(out, "nnz_features={}", last.nnz_features)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<Theta> {
    load_model(open(path)?)
}

pub fn cmd_predict(args: &PredictArgs, out: &mut impl Write) -> Result<()> {
    let theta = read_model(&args.model)?;
    let data = read_plain(&args.input)?;
    let probs = scores(&theta, &data)?;
    let write_all = |sink: &mut dyn Write| -> Result<()> {
        for p in &probs {
            writeln!(sink, "{}", fmt_real(*p))?;
        }
        Ok(sink.flush()?)
    };
    match &args.out {
        Some(path) => write_all(&mut create(path)?),
        None => write_all(out),
    }
}

pub fn cmd_eval(args: &EvalArgs, out: &mut impl Write, err: &mut impl Write) -> Result<()> {
    let theta = read_model(&args.model)?;
    let data = read_plain(&args.input)?;
    let report = evaluate(&theta, &data)?;
    if report.auc.is_none() {
        writeln!(err, "warning: data holds a single class; auc omitted")?;
    }
    if args.json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        writeln!(out, "{report}")?;
    }
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub lambda: f64,
    pub report: EvalReport,
}

/// Trains on every `(beta, lambda)` pair, in row-major order of the lists.
pub fn sweep(
    train_data: &GroupedDataset,
    valid: &Dataset,
    base: &Hyperparams,
    betas: &[f64],
    lambdas: &[f64],
    workers: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let ctx = context(train_data, workers)?;
    let mut rows = Vec::with_capacity(betas.len() * lambdas.len());
    for &beta in betas {
        for &lambda in lambdas {
            let hyper = Hyperparams { beta, lambda, ..base.clone() };
            hyper.validate()?;
            let (theta, _) = train(&ctx, &hyper)?;
            let theta = widen(theta, valid.dim);
            rows.push(SweepRow { beta, lambda, report: evaluate(&theta, valid)? });
        }
    }
    Ok(rows)
}

/// Pads with zero rows so that features unseen in training score as absent.
fn widen(theta: Theta, dim: usize) -> Theta {
    if dim <= theta.dim() {
        return theta;
    }
    let m = theta.m();
    let mut data = theta.into_vec();
    data.resize(dim * 2 * m, 0.0);
    Theta::from_vec(dim, m, data).expect("padded length matches")
}

fn fmt_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "-".into(), |a| format!("{a:.6}"))
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut impl Write) -> Result<()> {
    let train_data = read_training(&args.data)?;
    let valid = read_plain(&args.valid)?;
    let rows = sweep(
        &train_data,
        &valid,
        &args.hyper.to_hyper(0.0, 0.0),
        &args.betas,
        &args.lambdas,
        args.data.workers,
    )?;
    writeln!(out, "{:>10} {:>10} {:>10} {:>12} {:>12}", "beta", "lambda", "auc", "nnz_params", "nnz_features")?;
    let line = |tag: &str, r: &SweepRow| {
        format!(
            "{tag}{:>10} {:>10} {:>10} {:>12} {:>12}",
            fmt_real(r.beta),
            fmt_real(r.lambda),
            fmt_auc(r.report.auc),
            r.report.nnz_params,
            r.report.nnz_features
        )
    };
    for r in &rows {
        writeln!(out, "{}", line("", r))?;
    }
    let best = rows
        .iter()
        .filter(|r| r.report.auc.is_some())
        .max_by(|a, b| a.report.auc.partial_cmp(&b.report.auc).expect("finite auc"));
    match best {
        Some(r) => writeln!(out, "{}", line("best ", r).trim_start())?,
        None => writeln!(out, "best none (validation data holds a single class)")?,
    }
    Ok(())
}

/// Runs a parsed command line, writing results to `out` and warnings to `err`.
pub fn run(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Sweep(a) => cmd_sweep(a, out),
    }
}
