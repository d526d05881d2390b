//! Command-line interface: `gen-data`, `train`, `decode`, `score`,
//! `experiment` and `report`.
//!
//! Every command checks its flags and loads its inputs before writing
//! anything; files are written whole via rename, never partially.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::decode::{DecodeLimits, DecodeRecord, SourceModel};
use crate::error::{Error, Result};
use crate::eval::{
    read_results, render_report, results_csv, run_experiment_with_workers, Cell, ExperimentSpec,
    StrategyKind,
};
use crate::model::{load_model, save_model, sibling_vocab_paths, Dims, ModelParams, Vocab};
use crate::npad::ChainTraceRecord;
use crate::numeric::derive_seed;
use crate::training::{
    format_pairs, gen_splits, loss_trace_csv, parse_pairs, read_pairs, task_vocabs, train,
    Optimizer, TaskKind, TaskSpec, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "npad",
    version,
    about = "Noisy parallel approximate decoding for a GRU attention translator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate train/valid/test pairs and vocabularies for a synthetic task
    GenData(GenDataArgs),
    /// Train a model by maximum likelihood
    Train(TrainArgs),
    /// Decode source sentences, one JSON object per line
    Decode(DecodeArgs),
    /// Score reference targets under a model
    Score(ScoreArgs),
    /// Run the cells of an experiment spec and write a results CSV
    Experiment(ExperimentArgs),
    /// Render a results CSV as an aligned text table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    task: TaskKind,
    #[arg(long, default_value_t = 10)]
    src_symbols: usize,
    /// defaults to --src-symbols
    #[arg(long)]
    tgt_symbols: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_len: usize,
    #[arg(long, default_value_t = 10)]
    max_len: usize,
    /// training pairs
    #[arg(long, default_value_t = 5000)]
    count: usize,
    #[arg(long, default_value_t = 500)]
    valid_count: usize,
    #[arg(long, default_value_t = 500)]
    test_count: usize,
    #[arg(long)]
    seed: u64,
    /// output directory; receives train.tsv, valid.tsv, test.tsv, vocab.src, vocab.tgt
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// training pairs (TSV)
    #[arg(long)]
    input: PathBuf,
    /// validation pairs; defaults to valid.tsv next to --input
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    vocab_src: Option<PathBuf>,
    #[arg(long)]
    vocab_tgt: Option<PathBuf>,
    /// model file; the vocabularies are copied next to it
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 16)]
    d_emb: usize,
    #[arg(long, default_value_t = 32)]
    d_hid: usize,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.005)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f64,
    #[arg(long, default_value_t = 1.0)]
    clip_norm: f64,
    /// epochs without validation improvement before stopping; 0 disables
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long)]
    seed: u64,
    /// per-epoch loss CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    model: PathBuf,
    /// defaults to vocab.src next to --model
    #[arg(long)]
    vocab_src: Option<PathBuf>,
    /// defaults to vocab.tgt next to --model
    #[arg(long)]
    vocab_tgt: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    strategy: StrategyKind,
    /// beam width (beam, diverse: default 5) or NPAD inner beam width (default 1 = greedy)
    #[arg(long)]
    beam_width: Option<usize>,
    /// initial noise level for npad (default 0.3)
    #[arg(long)]
    sigma0: Option<f64>,
    /// parallel chains for npad and sample (default 50)
    #[arg(long)]
    chains: Option<usize>,
    /// diversity penalty for diverse (default 0.1)
    #[arg(long)]
    eta: Option<f64>,
    /// required by the stochastic strategies (sample, npad)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// maximum output length; default 2·|source| + 5
    #[arg(long)]
    max_len: Option<usize>,
    /// source sentences, optionally followed by a tab and a reference
    #[arg(long)]
    input: PathBuf,
    /// JSON-lines output; stdout when absent
    #[arg(long)]
    output: Option<PathBuf>,
    /// per-chain JSON-lines trace for npad and sample
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// source/target pairs (TSV)
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// overrides base_seed in the spec
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// results CSV; stdout when absent
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// results CSV
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parse `args` (program name first), run the command and return the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("npad: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => crate::io::write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    if workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn load_vocabs(anchor: &Path, src: Option<&Path>, tgt: Option<&Path>) -> Result<(Vocab, Vocab)> {
    let (s, t) = sibling_vocab_paths(anchor);
    Ok((
        Vocab::load(src.unwrap_or(&s))?,
        Vocab::load(tgt.unwrap_or(&t))?,
    ))
}

fn load_model_and_vocabs(a: &ModelArgs) -> Result<(ModelParams, Vocab, Vocab)> {
    let (src, tgt) = load_vocabs(&a.model, a.vocab_src.as_deref(), a.vocab_tgt.as_deref())?;
    let params = load_model(&a.model)?;
    if src.len() != params.dims.src_vocab || tgt.len() != params.dims.tgt_vocab {
        return Err(Error::Vocab(format!(
            "vocabulary sizes {}/{} do not match the model's {}/{}",
            src.len(),
            tgt.len(),
            params.dims.src_vocab,
            params.dims.tgt_vocab
        )));
    }
    Ok((params, src, tgt))
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let spec = TaskSpec {
        kind: a.task,
        src_symbols: a.src_symbols,
        tgt_symbols: a.tgt_symbols.unwrap_or(a.src_symbols),
        min_len: a.min_len,
        max_len: a.max_len,
        count: a.count,
        seed: a.seed,
    };
    if a.count == 0 || a.valid_count == 0 || a.test_count == 0 {
        return Err(Error::Config("split sizes must be at least 1".into()));
    }
    let (src, tgt) = task_vocabs(spec.kind, spec.src_symbols, spec.tgt_symbols)?;
    let splits = gen_splits(&spec, [a.count, a.valid_count, a.test_count])?;
    let texts = splits
        .iter()
        .map(|s| format_pairs(s, &src, &tgt))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    for (name, text) in ["train.tsv", "valid.tsv", "test.tsv"].iter().zip(&texts) {
        crate::io::write_atomic(&a.output.join(name), text.as_bytes())?;
    }
    let (sp, tp) = sibling_vocab_paths(&a.output.join("train.tsv"));
    src.save(&sp)?;
    tgt.save(&tp)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        lr_decay: a.lr_decay,
        clip_norm: a.clip_norm,
        epochs: a.epochs,
        batch_size: a.batch_size,
        patience: (a.patience > 0).then_some(a.patience),
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::adam(),
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
        seed: a.seed,
    };
    cfg.validate()?;
    let workers = pool(a.workers)?;
    let (src, tgt) = load_vocabs(&a.input, a.vocab_src.as_deref(), a.vocab_tgt.as_deref())?;
    let valid_path = a
        .valid
        .clone()
        .unwrap_or_else(|| a.input.parent().unwrap_or(Path::new("")).join("valid.tsv"));
    let train_set = read_pairs(&a.input, &src, &tgt)?;
    let valid_set = read_pairs(&valid_path, &src, &tgt)?;
    let dims = Dims {
        src_vocab: src.len(),
        tgt_vocab: tgt.len(),
        d_emb: a.d_emb,
        d_hid: a.d_hid,
    };
    let init = ModelParams::init_uniform(dims, a.init_scale, derive_seed(a.seed, 0))?;
    let outcome = workers.install(|| train(&init, &train_set, &valid_set, &cfg))?;
    for s in &outcome.trace {
        eprintln!(
            "epoch {:>3}  train {:.6}  valid {:.6}",
            s.epoch, s.train_nll, s.valid_nll
        );
    }
    eprintln!("best epoch {}", outcome.best_epoch);
    save_model(&outcome.params, &a.output)?;
    let (sp, tp) = sibling_vocab_paths(&a.output);
    src.save(&sp)?;
    tgt.save(&tp)?;
    if let Some(t) = &a.trace {
        crate::io::write_atomic(t, loss_trace_csv(&outcome.trace).as_bytes())?;
    }
    Ok(())
}

fn decode_cell(a: &DecodeArgs) -> Result<Cell> {
    let k = a.strategy;
    let reject = |flag: &str, given: bool| -> Result<()> {
        if given {
            Err(Error::Config(format!(
                "--{flag} does not apply to --strategy {}",
                k.name()
            )))
        } else {
            Ok(())
        }
    };
    let cell = match k {
        StrategyKind::Greedy | StrategyKind::Exact => {
            reject("beam-width", a.beam_width.is_some())?;
            reject("sigma0", a.sigma0.is_some())?;
            reject("chains", a.chains.is_some())?;
            reject("eta", a.eta.is_some())?;
            if k == StrategyKind::Greedy {
                Cell::greedy()
            } else {
                Cell::exact()
            }
        }
        StrategyKind::Beam => {
            reject("sigma0", a.sigma0.is_some())?;
            reject("chains", a.chains.is_some())?;
            reject("eta", a.eta.is_some())?;
            Cell::beam(a.beam_width.unwrap_or(5))
        }
        StrategyKind::Diverse => {
            reject("sigma0", a.sigma0.is_some())?;
            reject("chains", a.chains.is_some())?;
            Cell::diverse(a.beam_width.unwrap_or(5), a.eta.unwrap_or(0.1))
        }
        StrategyKind::Sample => {
            reject("beam-width", a.beam_width.is_some())?;
            reject("sigma0", a.sigma0.is_some())?;
            reject("eta", a.eta.is_some())?;
            Cell::sample(a.chains.unwrap_or(50))
        }
        StrategyKind::Npad => {
            reject("eta", a.eta.is_some())?;
            Cell::npad(
                a.beam_width.unwrap_or(1),
                a.sigma0.unwrap_or(0.3),
                a.chains.unwrap_or(50),
            )
        }
    };
    if a.chains == Some(0) {
        return Err(Error::Config("--chains must be at least 1".into()));
    }
    cell.validate()?;
    if a.trace.is_some() && !matches!(k, StrategyKind::Npad | StrategyKind::Sample) {
        return Err(Error::Config(
            "--trace needs --strategy npad or sample".into(),
        ));
    }
    Ok(cell)
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let cell = decode_cell(&a)?;
    let seed = match (
        a.seed,
        matches!(cell.strategy, StrategyKind::Sample | StrategyKind::Npad),
    ) {
        (Some(s), _) => s,
        (None, true) => {
            return Err(Error::Config(format!(
                "--strategy {} is stochastic and needs --seed",
                cell.strategy.name()
            )))
        }
        (None, false) => 0,
    };
    let fixed_len = a.max_len.map(DecodeLimits::new).transpose()?;
    let workers = pool(a.workers)?;
    let (params, src, tgt) = load_model_and_vocabs(&a.model)?;
    let pairs = parse_pairs(&crate::io::read_to_string(&a.input)?, &src, &tgt, true)?;
    let stochastic = cell.is_stochastic();

    let outputs = workers.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let limits = fixed_len.unwrap_or(DecodeLimits::for_source(p.source.len()));
                let s = derive_seed(seed, i as u64);
                cell.decode(&params, &p.source, s, limits).map(|o| (s, o))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let symbols = |t: &[usize]| -> Result<Vec<String>> {
        let body = crate::eval::strip_eos(t);
        Ok(tgt
            .decode_tokens(body)?
            .split_whitespace()
            .map(String::from)
            .collect())
    };
    let mut out = String::new();
    let mut trace = String::new();
    for (i, (s, o)) in outputs.iter().enumerate() {
        let rec = DecodeRecord {
            input_id: i,
            strategy: cell.strategy.name().to_string(),
            tokens: symbols(&o.tokens)?,
            logp: o.rescored_logp,
            complete: o.complete,
            steps: o.steps,
            seed: stochastic.then_some(*s),
        };
        out.push_str(&rec.to_json_line());
        for c in &o.chains {
            let r = ChainTraceRecord {
                input_id: i,
                chain_index: c.chain_index,
                sigma0_effective: c.sigma0_effective,
                tokens: symbols(c.tokens())?,
                noisy_logp: c.noisy_logp,
                rescored_logp: c.rescored_logp,
            };
            trace.push_str(&serde_json::to_string(&r).expect("trace serializes"));
            trace.push('\n');
        }
    }
    if let Some(t) = &a.trace {
        crate::io::write_atomic(t, trace.as_bytes())?;
    }
    emit(a.output.as_deref(), &out)
}

fn score_cmd(a: ScoreArgs) -> Result<()> {
    let (params, src, tgt) = load_model_and_vocabs(&a.model)?;
    let pairs = read_pairs(&a.input, &src, &tgt)?;
    let mut out = String::new();
    let mut total = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        let m = SourceModel::new(&params, &p.source)?;
        let logp = crate::decode::score_tokens(&m, &p.target)?;
        total -= logp;
        let line = serde_json::json!({
            "input_id": i,
            "logp": logp,
            "length": p.target.len(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    if !pairs.is_empty() {
        eprintln!(
            "mean NLL {:.6} over {} pairs",
            total / pairs.len() as f64,
            pairs.len()
        );
    }
    emit(a.output.as_deref(), &out)
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec::load(&a.spec)?;
    let seed = a
        .seed
        .or(spec.base_seed)
        .ok_or_else(|| Error::Config("experiment needs --seed or base_seed in the spec".into()))?;
    if a.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let workers = a.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let outcome = run_experiment_with_workers(&spec, seed, workers)?;
    for f in &outcome.failures {
        eprintln!(
            "npad: cell {} (width {}, chains {}) failed: {}",
            f.cell.strategy.name(),
            f.cell.beam_width,
            f.cell.chains,
            f.error
        );
    }
    emit(a.output.as_deref(), &results_csv(&outcome.rows))
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let rows = read_results(&crate::io::read_to_string(&a.input)?)?;
    emit(a.output.as_deref(), &render_report(&rows))
}
