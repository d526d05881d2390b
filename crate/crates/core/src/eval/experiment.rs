use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{
    mean_nll, mean_nll_per_token, records_bleu, BleuConfig, Cell, EvalRecord, StrategyKind,
};
use crate::decode::DecodeLimits;
use crate::error::{Error, Result};
use crate::model::{load_model, sibling_vocab_paths, ModelParams, Vocab};
use crate::numeric::derive_seed;
use crate::training::{read_pairs, SequencePair};

pub const RESULTS_HEADER: &str =
    "strategy,beam_width,sigma0,chains,eta,mean_nll,mean_nll_per_token,bleu";

/// Preset groups of cells laid out like the four comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CanonicalTable {
    /// greedy, 50-sample best-of, NPAD with 50 chains over several σ0
    NoiseSweep,
    /// greedy and NPAD at σ0 = 0.3 with 5, 10 and 50 chains
    ChainSweep,
    /// greedy and beam search of width 5 and 10, each with and without NPAD
    NpadBeam,
    /// beam, NPAD+beam and diverse beam search at widths 5 and 10
    NpadVsDiverse,
}

pub fn canonical_cells(table: CanonicalTable) -> Vec<Cell> {
    match table {
        CanonicalTable::NoiseSweep => {
            let mut cells = vec![Cell::greedy(), Cell::sample(50)];
            cells.extend([0.1, 0.2, 0.3, 0.5].map(|s| Cell::npad(1, s, 50)));
            cells
        }
        CanonicalTable::ChainSweep => {
            let mut cells = vec![Cell::greedy()];
            cells.extend([5, 10, 50].map(|m| Cell::npad(1, 0.3, m)));
            cells
        }
        CanonicalTable::NpadBeam => vec![
            Cell::greedy(),
            Cell::npad(1, 0.3, 50),
            Cell::beam(5),
            Cell::npad(5, 0.3, 5),
            Cell::npad(5, 0.1, 10),
            Cell::beam(10),
            Cell::npad(10, 0.2, 5),
            Cell::npad(10, 0.1, 10),
        ],
        CanonicalTable::NpadVsDiverse => {
            let mut cells = Vec::new();
            for (k, s) in [(5, 0.3), (10, 0.2)] {
                cells.push(Cell::beam(k));
                cells.push(Cell::npad(k, s, 5));
                cells.extend([0.001, 0.01, 0.1, 1.0].map(|eta| Cell::diverse(k, eta)));
            }
            cells
        }
    }
}

/// Declarative experiment description, read from TOML.
///
/// ```toml
/// model = "model.bin"        # relative paths resolve against this file
/// test = "test.tsv"
/// base_seed = 7              # optional; the CLI --seed overrides it
/// max_len = 30               # optional; default 2·|source| + 5
/// bleu_smoothing = false
/// tables = ["noise-sweep"]
///
/// [[cell]]
/// strategy = "npad"
/// beam_width = 5
/// sigma0 = 0.2
/// chains = 10
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: PathBuf,
    /// default: `vocab.src` next to the model
    #[serde(default)]
    pub vocab_src: Option<PathBuf>,
    #[serde(default)]
    pub vocab_tgt: Option<PathBuf>,
    pub test: PathBuf,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub max_len: Option<usize>,
    #[serde(default)]
    pub bleu_smoothing: bool,
    #[serde(default)]
    pub tables: Vec<CanonicalTable>,
    #[serde(default, rename = "cell")]
    pub cells: Vec<Cell>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::format("experiment spec", e.to_string()))?;
        for c in spec.all_cells() {
            c.validate()?;
        }
        if spec.all_cells().is_empty() {
            return Err(Error::Config("experiment spec names no cells".into()));
        }
        if spec.max_len == Some(0) {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        Ok(spec)
    }

    /// Parse a spec file, resolving its paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut spec = Self::parse(&crate::io::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut spec.model, &mut spec.test] {
            *p = dir.join(&*p);
        }
        for p in [&mut spec.vocab_src, &mut spec.vocab_tgt]
            .into_iter()
            .flatten()
        {
            *p = dir.join(&*p);
        }
        Ok(spec)
    }

    /// Table presets followed by explicit cells; repeats are dropped.
    pub fn all_cells(&self) -> Vec<Cell> {
        let mut seen = HashSet::new();
        self.tables
            .iter()
            .flat_map(|&t| canonical_cells(t))
            .chain(self.cells.iter().copied())
            .filter(|c| seen.insert(cell_key(c)))
            .collect()
    }

    fn vocab_paths(&self) -> (PathBuf, PathBuf) {
        let (s, t) = sibling_vocab_paths(&self.model);
        (
            self.vocab_src.clone().unwrap_or(s),
            self.vocab_tgt.clone().unwrap_or(t),
        )
    }
}

fn cell_key(c: &Cell) -> (StrategyKind, usize, Option<u64>, usize, Option<u64>) {
    (
        c.strategy,
        c.beam_width,
        c.sigma0.map(f64::to_bits),
        c.chains,
        c.eta.map(f64::to_bits),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub cell: Cell,
    pub mean_nll: f64,
    pub mean_nll_per_token: f64,
    pub bleu: f64,
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    /// per-cell records in test-set order, parallel to `rows`
    pub records: Vec<Vec<EvalRecord>>,
    pub failures: Vec<CellFailure>,
}

/// Decode every test pair with `cell`. Sentence `i` uses seed
/// `derive_seed(base_seed, i)`, so results do not depend on scheduling.
pub fn evaluate_cell(
    params: &ModelParams,
    pairs: &[SequencePair],
    cell: &Cell,
    base_seed: u64,
    max_len: Option<usize>,
    bleu: BleuConfig,
) -> Result<(ResultRow, Vec<EvalRecord>)> {
    cell.validate()?;
    let records = pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let limits = match max_len {
                Some(n) => DecodeLimits::new(n)?,
                None => DecodeLimits::for_source(pair.source.len()),
            };
            let out = cell.decode(
                params,
                &pair.source,
                derive_seed(base_seed, i as u64),
                limits,
            )?;
            Ok(EvalRecord {
                input_id: i,
                strategy: cell.strategy.name().to_string(),
                tokens: out.tokens,
                rescored_logp: out.rescored_logp,
                reference: pair.target.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let row = ResultRow {
        cell: *cell,
        mean_nll: mean_nll(&records)?,
        mean_nll_per_token: mean_nll_per_token(&records)?,
        bleu: records_bleu(&records, bleu)?,
    };
    Ok((row, records))
}

/// Run every cell over an already-loaded test set on a pool of `workers`
/// threads. A failing cell is recorded and the rest still run.
pub fn run_cells(
    params: &ModelParams,
    pairs: &[SequencePair],
    cells: &[Cell],
    base_seed: u64,
    max_len: Option<usize>,
    bleu: BleuConfig,
    workers: usize,
) -> Result<ExperimentOutcome> {
    if pairs.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut outcome = ExperimentOutcome {
        rows: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    for cell in cells {
        match pool.install(|| evaluate_cell(params, pairs, cell, base_seed, max_len, bleu)) {
            Ok((row, recs)) => {
                outcome.rows.push(row);
                outcome.records.push(recs);
            }
            Err(e) => outcome.failures.push(CellFailure {
                cell: *cell,
                error: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Load the model and test set named by `spec` and run all its cells.
pub fn run_experiment_with_workers(
    spec: &ExperimentSpec,
    base_seed: u64,
    workers: usize,
) -> Result<ExperimentOutcome> {
    let params = load_model(&spec.model)?;
    let (src_path, tgt_path) = spec.vocab_paths();
    let src = Vocab::load(&src_path)?;
    let tgt = Vocab::load(&tgt_path)?;
    if src.len() != params.dims.src_vocab || tgt.len() != params.dims.tgt_vocab {
        return Err(Error::Vocab(format!(
            "vocabulary sizes {}/{} do not match the model's {}/{}",
            src.len(),
            tgt.len(),
            params.dims.src_vocab,
            params.dims.tgt_vocab
        )));
    }
    let pairs = read_pairs(&spec.test, &src, &tgt)?;
    let bleu = BleuConfig {
        smoothing: spec.bleu_smoothing,
        ..BleuConfig::default()
    };
    run_cells(
        &params,
        &pairs,
        &spec.all_cells(),
        base_seed,
        spec.max_len,
        bleu,
        workers,
    )
}

/// [`run_experiment_with_workers`] using the spec's own seed and all cores.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let seed = spec
        .base_seed
        .ok_or_else(|| Error::Config("experiment spec has no base_seed".into()))?;
    run_experiment_with_workers(spec, seed, rayon::current_num_threads())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6}\n",
            r.cell.strategy.name(),
            r.cell.beam_width,
            opt(r.cell.sigma0),
            r.cell.chains,
            opt(r.cell.eta),
            r.mean_nll,
            r.mean_nll_per_token,
            r.bleu
        ));
    }
    out
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    crate::io::write_atomic(path, results_csv(rows).as_bytes())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::format(
            "results csv",
            format!("line {line}: bad value {raw:?} in column {}", i + 1),
        )
    })
}

fn parse_opt(rec: &csv::StringRecord, i: usize, line: u64) -> Result<Option<f64>> {
    if rec.get(i).unwrap_or("").is_empty() {
        Ok(None)
    } else {
        parse_field(rec, i, line).map(Some)
    }
}

/// Parse a results CSV, checking the header exactly.
pub fn read_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format("results csv", e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != RESULTS_HEADER {
        return Err(Error::format(
            "results csv",
            format!("expected header {RESULTS_HEADER:?}, found {header:?}"),
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format("results csv", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let name = rec.get(0).unwrap_or("");
        let strategy = StrategyKind::parse(name).ok_or_else(|| {
            Error::format(
                "results csv",
                format!("line {line}: unknown strategy {name:?}"),
            )
        })?;
        let cell = Cell {
            strategy,
            beam_width: parse_field(&rec, 1, line)?,
            sigma0: parse_opt(&rec, 2, line)?,
            chains: parse_field(&rec, 3, line)?,
            eta: parse_opt(&rec, 4, line)?,
        };
        cell.validate()
            .map_err(|e| Error::format("results csv", format!("line {line}: {e}")))?;
        rows.push(ResultRow {
            cell,
            mean_nll: parse_field(&rec, 5, line)?,
            mean_nll_per_token: parse_field(&rec, 6, line)?,
            bleu: parse_field(&rec, 7, line)?,
        });
    }
    Ok(rows)
}
