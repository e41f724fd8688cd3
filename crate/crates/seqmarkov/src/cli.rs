//! Batch command-line front-end: ingestion, fitting, model selection,
//! decoding, simulation, and process-map export as reproducible runs.
//!
//! Every output file embeds a provenance block (the parsed subcommand
//! configuration plus the seed); re-running with the same configuration
//! reproduces the file byte for byte, for any `--threads` value, as long as
//! no wall-clock budget is set. `--threads` is therefore an execution
//! detail and deliberately not part of the provenance block.
//!
//! Errors print a single machine-parsable line to stderr:
//! `error[<Class>]: <human text>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    direct_ml_fit_hmm, direct_ml_fit_mixture, fit_hmm_with_restarts, fit_mixture_with_restarts,
    randomize_like_hmm, randomize_like_mixture, round_seed, FitReport, GlobalControl,
    RestartControl,
};
use crate::hmm::{viterbi_path, EmControl, EmResult, EmissionMatrix, HiddenMarkovModel};
use crate::markov::{
    estimate_mm, mm_log_likelihood, MarkovModel, ProbabilityVector, TransitionMatrix,
};
use crate::mixture::{
    cluster_priors, joint_block_model, summarize, ClusterModel, DesignSpec, MixtureModel,
};
use crate::modelselect::{bic_hmm, bic_markov, bic_mixture, ModelScore};
use crate::procmine::{cluster_process_maps, diff_graph, model_process_graph, seqtrate};
use crate::seqdata::{
    ingest_wide_csv, Alphabet, Cell, CovariateFrame, IngestOptions, SequenceSet,
};

#[derive(Parser, Debug)]
#[command(
    name = "seqmarkov",
    version,
    about = "Markovian models for categorical sequence data"
)]
pub struct Cli {
    /// Worker threads; results are identical for any value. Defaults to the
    /// SEQMARKOV_THREADS environment variable when set.
    #[arg(long, global = true, env = "SEQMARKOV_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

/// The parsed run configuration; serialized into every output file's
/// provenance block.
#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Fit a model (mm, hmm, mmm, mhmm) and write model + fit report JSON.
    Fit(FitArgs),
    /// Estimate the transition matrix of a panel.
    Trate(TrateArgs),
    /// Export a thresholded process map (DOT and/or JSON).
    Graph(GraphArgs),
    /// Export a signed difference map between two Markov models.
    Diff(DiffArgs),
    /// Decode most-probable hidden paths to CSV.
    Paths(PathsArgs),
    /// Simulate sequences from a model file.
    Simulate(SimulateArgs),
    /// Compare fitted models by BIC on one panel.
    Bic(BicArgs),
    /// Print the mixture summary (priors, classification, coefficients).
    Summary(SummaryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mm,
    Hmm,
    Mmm,
    Mhmm,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Wide-format sequence file (CSV; `--tsv` for tab-separated).
    #[arg(long)]
    pub input: PathBuf,
    /// 1-based inclusive column range holding the sequence cells, e.g. 3-22.
    #[arg(long, value_parser = parse_col_range)]
    pub seq_cols: (usize, usize),
    /// Header name of the id column; row numbers when absent.
    #[arg(long)]
    pub id_col: Option<String>,
    /// Comma-separated alphabet; inferred lexicographically when omitted.
    #[arg(long, value_delimiter = ',')]
    pub alphabet: Option<Vec<String>>,
    /// Token marking missing cells.
    #[arg(long, default_value = "")]
    pub missing_token: String,
    /// Read tab-separated input.
    #[arg(long, default_value_t = false)]
    pub tsv: bool,
}

fn parse_col_range(text: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) = text
        .split_once('-')
        .ok_or_else(|| format!("expected a range like 3-22, got {text:?}"))?;
    let lo: usize = lo.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let hi: usize = hi.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    Ok((lo, hi))
}

impl InputArgs {
    fn ingest(&self) -> Result<(SequenceSet, crate::seqdata::IngestSummary)> {
        let alphabet = match &self.alphabet {
            Some(symbols) => Some(Alphabet::new(symbols.clone())?),
            None => None,
        };
        let options = IngestOptions {
            seq_cols: self.seq_cols,
            id_col: self.id_col.clone(),
            alphabet,
            missing_token: self.missing_token.clone(),
            delimiter: if self.tsv { b'\t' } else { b',' },
        };
        ingest_wide_csv(&self.input, &options)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CovArgs {
    /// Covariate file; defaults to the sequence input file.
    #[arg(long)]
    pub cov_file: Option<PathBuf>,
    /// Id column of the covariate file.
    #[arg(long)]
    pub cov_id_col: Option<String>,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Explicit level order per covariate, e.g. GPA=Low,Middle,High
    /// (repeatable). Levels default to sorted distinct values.
    #[arg(long)]
    pub levels: Vec<String>,
    /// Include the common intercept (`off` gives one coefficient per level).
    #[arg(long, value_parser = ["on", "off"], default_value = "on")]
    pub intercept: String,
}

impl CovArgs {
    fn design(&self) -> DesignSpec {
        DesignSpec { covariates: self.covariates.clone(), intercept: self.intercept == "on" }
    }

    fn load(&self, seqs: &SequenceSet, input: &InputArgs) -> Result<CovariateFrame> {
        if self.covariates.is_empty() {
            return Ok(CovariateFrame::ids_only(seqs.ids().to_vec()));
        }
        let mut level_overrides: Vec<(String, Vec<String>)> = Vec::new();
        for spec in &self.levels {
            let (name, levels) = spec.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("--levels expects NAME=a,b,c; got {spec:?}"))
            })?;
            level_overrides
                .push((name.to_string(), levels.split(',').map(str::to_string).collect()));
        }
        let columns: Vec<(String, Option<Vec<String>>)> = self
            .covariates
            .iter()
            .map(|name| {
                let levels = level_overrides
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, l)| l.clone());
                (name.clone(), levels)
            })
            .collect();
        let path = self.cov_file.as_ref().unwrap_or(&input.input);
        let id_col =
            self.cov_id_col.as_deref().or(if self.cov_file.is_none() { input.id_col.as_deref() } else { None });
        let delimiter = if input.tsv && self.cov_file.is_none() { b'\t' } else { b',' };
        let frame = CovariateFrame::from_csv(path, id_col, &columns, delimiter)?;
        frame.check_alignment(seqs)?;
        Ok(frame)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[command(flatten)]
    pub input: InputArgs,
    /// Hidden states: one value for hmm, per-cluster list for mhmm.
    #[arg(long, value_delimiter = ',')]
    pub n_states: Option<Vec<usize>>,
    /// Cluster count for mmm (mhmm derives it from --n-states).
    #[arg(long)]
    pub n_clusters: Option<usize>,
    #[command(flatten)]
    pub cov: CovArgs,
    /// Extra EM rounds from random starting values.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// Ledger length (best per-round log-likelihoods to keep).
    #[arg(long)]
    pub n_optimum: Option<usize>,
    /// Master seed; required for every randomized model family.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    /// Relative log-likelihood tolerance of EM.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Direct numerical maximum likelihood (multistart quasi-Newton)
    /// instead of EM restarts.
    #[arg(long, default_value_t = false)]
    pub global: bool,
    #[arg(long)]
    pub multistart: Option<usize>,
    #[arg(long)]
    pub maxeval: Option<u64>,
    /// Wall-clock budget in seconds for --global (irreproducible when it
    /// binds).
    #[arg(long)]
    pub maxtime: Option<f64>,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Output fit-report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GraphArgs {
    /// Fitted model JSON (mm or a mixture of mm).
    #[arg(long, conflicts_with = "input")]
    pub model: Option<PathBuf>,
    /// Estimate the map directly from a sequence file instead.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = parse_col_range)]
    pub seq_cols: Option<(usize, usize)>,
    #[arg(long)]
    pub id_col: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub alphabet: Option<Vec<String>>,
    #[arg(long, default_value = "")]
    pub missing_token: String,
    #[arg(long, default_value_t = false)]
    pub tsv: bool,
    /// De-emphasis threshold: edges below it are faded.
    #[arg(long, default_value_t = 0.0)]
    pub cut: f64,
    /// Hiding threshold: edges below it are omitted.
    #[arg(long, default_value_t = 0.0)]
    pub minimum: f64,
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiffArgs {
    /// Baseline model JSON (mm).
    #[arg(long)]
    pub model_a: PathBuf,
    /// Comparison model JSON (mm); edge weights are B − A.
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub minimum: f64,
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PathsArgs {
    /// Fitted model JSON (hmm or mixture).
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cov: CovArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// Model JSON to draw from.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of sequences (ignored for mixtures with a covariate file).
    #[arg(long)]
    pub n: Option<usize>,
    /// Sequence length.
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub cov: CovArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BicArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cov: CovArgs,
    /// Fitted model JSON files to compare.
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SummaryArgs {
    /// Fitted mixture model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cov: CovArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Any fitted model, tagged for storage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnyModel {
    Mm(MarkovModel),
    Hmm(HiddenMarkovModel),
    Mixture(MixtureModel),
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a Command,
}

fn provenance(command: &Command) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(Provenance {
        tool: "seqmarkov",
        version: env!("CARGO_PKG_VERSION"),
        command,
    })?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_json_artifact(path: &Path, provenance: &serde_json::Value, key: &str, value: serde_json::Value) -> Result<()> {
    let mut map = serde_json::Map::new();
    map.insert("provenance".into(), provenance.clone());
    map.insert(key.into(), value);
    let text = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
    write_text(path, &format!("{text}\n"))
}

fn dot_with_provenance(dot: &str, provenance: &serde_json::Value) -> Result<String> {
    Ok(format!("// provenance: {}\n{dot}", serde_json::to_string(provenance)?))
}

fn load_model(path: &Path) -> Result<AnyModel> {
    #[derive(Deserialize)]
    struct ModelFile {
        model: AnyModel,
    }
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: not a model file: {e}", path.display())))?;
    Ok(file.model)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let run_result = match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build();
            match pool {
                Ok(pool) => pool.install(|| run(&cli.command)),
                Err(e) => Err(Error::InvalidInput(format!("cannot build thread pool: {e}"))),
            }
        }
        None => run(&cli.command),
    };
    match run_result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            1
        }
    }
}

/// Execute one subcommand, writing all requested artifacts.
pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Fit(args) => run_fit(command, args),
        Command::Trate(args) => run_trate(command, args),
        Command::Graph(args) => run_graph(command, args),
        Command::Diff(args) => run_diff(command, args),
        Command::Paths(args) => run_paths(command, args),
        Command::Simulate(args) => run_simulate(command, args),
        Command::Bic(args) => run_bic(command, args),
        Command::Summary(args) => run_summary(command, args),
    }
}

fn state_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("State {i}")).collect()
}

fn cluster_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("Cluster {i}")).collect()
}

fn uniform_hmm(alphabet: &Alphabet, n_states: usize) -> Result<HiddenMarkovModel> {
    let labels = state_labels(n_states);
    let m = alphabet.len();
    HiddenMarkovModel::new(
        alphabet.clone(),
        labels.clone(),
        ProbabilityVector::uniform(labels.clone())?,
        TransitionMatrix::new(vec![vec![1.0 / n_states as f64; n_states]; n_states], labels)?,
        EmissionMatrix::new(vec![vec![1.0 / m as f64; m]; n_states])?,
    )
}

fn uniform_mm(alphabet: &Alphabet) -> Result<MarkovModel> {
    let m = alphabet.len();
    let labels = alphabet.symbols().to_vec();
    MarkovModel::new(
        alphabet.clone(),
        ProbabilityVector::uniform(labels.clone())?,
        TransitionMatrix::new(vec![vec![1.0 / m as f64; m]; m], labels)?,
    )
}

fn require_seed(args: &FitArgs) -> Result<u64> {
    args.seed.ok_or_else(|| {
        Error::InvalidInput("--seed is required for randomized fits (hmm, mmm, mhmm)".into())
    })
}

fn run_fit(command: &Command, args: &FitArgs) -> Result<()> {
    let (seqs, summary) = args.input.ingest()?;
    println!(
        "{} sequences, min/max length: {}/{}",
        summary.n_sequences, summary.min_length, summary.max_length
    );
    if !summary.all_missing_rows.is_empty() {
        println!(
            "note: {} sequence(s) with no observed cells are excluded from estimation",
            summary.all_missing_rows.len()
        );
    }
    let prov = provenance(command)?;

    match args.model {
        ModelKind::Mm => {
            let fit = estimate_mm(&seqs)?;
            let ll = mm_log_likelihood(&fit.model, &seqs)?;
            print!("{}", fit.model);
            for note in &fit.notes {
                println!("note: {note:?}");
            }
            println!("logLik: {ll}");
            write_json_artifact(
                &args.out,
                &prov,
                "model",
                serde_json::to_value(AnyModel::Mm(fit.model.clone()))?,
            )?;
            if let Some(report_path) = &args.report {
                let report = FitReport {
                    model: (),
                    log_likelihood: ll,
                    result: EmResult { log_lik: ll, iterations: 0, change: 0.0, history: vec![ll] },
                    best_opt_restart: vec![ll],
                    failures: Vec::new(),
                    best_round: 0,
                    optimum_count: 1,
                    master_seed: args.seed.unwrap_or(0),
                    round_seeds: vec![],
                    termination: crate::estimation::Termination::Convergence,
                    wall_clock_bound: false,
                };
                write_json_artifact(report_path, &prov, "report", serde_json::to_value(&report)?)?;
            }
        }
        ModelKind::Hmm => {
            let seed = require_seed(args)?;
            let n_states = match args.n_states.as_deref() {
                Some([n]) => *n,
                _ => {
                    return Err(Error::InvalidInput(
                        "--n-states with a single value is required for hmm".into(),
                    ))
                }
            };
            let start = randomize_like_hmm(&uniform_hmm(seqs.alphabet(), n_states)?, round_seed(seed, 0))?;
            let report = if args.global {
                direct_ml_fit_hmm(&start, &seqs, &global_control(args, seed))?
            } else {
                fit_hmm_with_restarts(&start, &seqs, &em_control(args), &restart_control(args, seed))?
            };
            print!("{}", report.model);
            print_fit_diagnostics(&report.result, &report.best_opt_restart);
            write_json_artifact(
                &args.out,
                &prov,
                "model",
                serde_json::to_value(AnyModel::Hmm(report.model.clone()))?,
            )?;
            if let Some(report_path) = &args.report {
                write_json_artifact(report_path, &prov, "report", serde_json::to_value(&report)?)?;
            }
        }
        ModelKind::Mmm | ModelKind::Mhmm => {
            let seed = require_seed(args)?;
            let cov = args.cov.load(&seqs, &args.input)?;
            let design = if args.cov.covariates.is_empty() {
                DesignSpec::intercept_only()
            } else {
                args.cov.design()
            };
            let clusters: Vec<ClusterModel> = match args.model {
                ModelKind::Mmm => {
                    let k = args.n_clusters.ok_or_else(|| {
                        Error::InvalidInput("--n-clusters is required for mmm".into())
                    })?;
                    (0..k)
                        .map(|_| Ok(ClusterModel::Markov(uniform_mm(seqs.alphabet())?)))
                        .collect::<Result<_>>()?
                }
                ModelKind::Mhmm => {
                    let states = args.n_states.clone().ok_or_else(|| {
                        Error::InvalidInput(
                            "--n-states with one value per cluster is required for mhmm".into(),
                        )
                    })?;
                    states
                        .iter()
                        .map(|&s| Ok(ClusterModel::Hidden(uniform_hmm(seqs.alphabet(), s)?)))
                        .collect::<Result<_>>()?
                }
                _ => unreachable!(),
            };
            let k = clusters.len();
            let template =
                MixtureModel::with_zero_coefficients(clusters, cluster_labels(k), design, &cov)?;
            let start = randomize_like_mixture(&template, round_seed(seed, 0))?;
            let report = if args.global {
                direct_ml_fit_mixture(&start, &cov, &seqs, &global_control(args, seed))?
            } else {
                fit_mixture_with_restarts(
                    &start,
                    &cov,
                    &seqs,
                    &em_control(args),
                    &restart_control(args, seed),
                )?
            };
            let mix_summary = summarize(&report.model, &cov, &seqs)?;
            print!("{mix_summary}");
            print_fit_diagnostics(&report.result, &report.best_opt_restart);
            write_json_artifact(
                &args.out,
                &prov,
                "model",
                serde_json::to_value(AnyModel::Mixture(report.model.clone()))?,
            )?;
            if let Some(report_path) = &args.report {
                write_json_artifact(report_path, &prov, "report", serde_json::to_value(&report)?)?;
            }
        }
    }
    Ok(())
}

fn em_control(args: &FitArgs) -> EmControl {
    EmControl { max_iterations: args.max_iterations, relative_tolerance: args.tolerance }
}

fn restart_control(args: &FitArgs, seed: u64) -> RestartControl {
    RestartControl {
        times: args.restarts,
        n_optimum: args.n_optimum.unwrap_or(25),
        seed,
        tolerance: 1e-4,
    }
}

fn global_control(args: &FitArgs, seed: u64) -> GlobalControl {
    GlobalControl {
        maxtime: args.maxtime,
        maxeval: args.maxeval.unwrap_or(100_000),
        multistart: args.multistart.unwrap_or(10),
        seed,
    }
}

fn print_fit_diagnostics(result: &EmResult, ledger: &[f64]) {
    println!("logLik: {}", result.log_lik);
    println!("iterations: {}", result.iterations);
    println!("change: {:e}", result.change);
    let mut line = String::from("best_opt_restart:");
    for ll in ledger {
        let _ = write!(line, " {ll}");
    }
    println!("{line}");
}

fn run_trate(command: &Command, args: &TrateArgs) -> Result<()> {
    let (seqs, _) = args.input.ingest()?;
    let transitions = seqtrate(&seqs)?;
    print_transition_table(&transitions);
    if let Some(out) = &args.out {
        let prov = provenance(command)?;
        write_json_artifact(out, &prov, "transitions", serde_json::to_value(&transitions)?)?;
    }
    Ok(())
}

fn print_transition_table(t: &TransitionMatrix) {
    let width = t.labels().iter().map(|l| l.len()).max().unwrap_or(0).max(6);
    print!("{:width$}", "");
    for l in t.labels() {
        print!(" {l:>width$}");
    }
    println!();
    for (r, label) in t.labels().iter().enumerate() {
        print!("{label:<width$}");
        for p in t.row(r) {
            print!(" {p:>width$.4}");
        }
        println!();
    }
}

fn run_graph(command: &Command, args: &GraphArgs) -> Result<()> {
    if args.dot.is_none() && args.json.is_none() {
        return Err(Error::InvalidInput("graph needs --dot and/or --json".into()));
    }
    let prov = provenance(command)?;
    let graphs: Vec<(String, crate::procmine::ProcessGraph)> = if let Some(model_path) = &args.model {
        match load_model(model_path)? {
            AnyModel::Mm(m) => {
                vec![("process".to_string(), model_process_graph(&m, args.cut, args.minimum)?)]
            }
            AnyModel::Mixture(m) => {
                let maps = cluster_process_maps(&m, args.cut, args.minimum)?;
                m.cluster_labels.iter().cloned().zip(maps).collect()
            }
            AnyModel::Hmm(_) => {
                return Err(Error::InvalidInput(
                    "process maps need transition probabilities over observed states (mm or a mixture of mm)"
                        .into(),
                ))
            }
        }
    } else {
        let input = args.input.clone().ok_or_else(|| {
            Error::InvalidInput("graph needs --model or --input with --seq-cols".into())
        })?;
        let seq_cols = args
            .seq_cols
            .ok_or_else(|| Error::InvalidInput("--seq-cols is required with --input".into()))?;
        let input_args = InputArgs {
            input,
            seq_cols,
            id_col: args.id_col.clone(),
            alphabet: args.alphabet.clone(),
            missing_token: args.missing_token.clone(),
            tsv: args.tsv,
        };
        let (seqs, _) = input_args.ingest()?;
        let fit = estimate_mm(&seqs)?;
        vec![("process".to_string(), model_process_graph(&fit.model, args.cut, args.minimum)?)]
    };

    let multi = graphs.len() > 1;
    for (i, (name, graph)) in graphs.iter().enumerate() {
        if let Some(dot_path) = &args.dot {
            let path = suffixed_path(dot_path, multi.then_some(i + 1));
            write_text(&path, &dot_with_provenance(&graph.to_dot(name), &prov)?)?;
        }
        if let Some(json_path) = &args.json {
            let path = suffixed_path(json_path, multi.then_some(i + 1));
            write_json_artifact(&path, &prov, "graph", serde_json::to_value(graph)?)?;
        }
    }
    Ok(())
}

fn suffixed_path(path: &Path, index: Option<usize>) -> PathBuf {
    match index {
        None => path.to_path_buf(),
        Some(i) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("");
            let name = if ext.is_empty() {
                format!("{stem}-cluster-{i}")
            } else {
                format!("{stem}-cluster-{i}.{ext}")
            };
            path.with_file_name(name)
        }
    }
}

fn as_markov(model: AnyModel, which: &str) -> Result<MarkovModel> {
    match model {
        AnyModel::Mm(m) => Ok(m),
        _ => Err(Error::InvalidInput(format!(
            "{which} must be a plain Markov model (mm) for difference maps"
        ))),
    }
}

fn run_diff(command: &Command, args: &DiffArgs) -> Result<()> {
    if args.dot.is_none() && args.json.is_none() {
        return Err(Error::InvalidInput("diff needs --dot and/or --json".into()));
    }
    let a = as_markov(load_model(&args.model_a)?, "--model-a")?;
    let b = as_markov(load_model(&args.model_b)?, "--model-b")?;
    let diff = diff_graph(&a.transitions, &b.transitions, args.minimum)?;
    let prov = provenance(command)?;
    if let Some(dot_path) = &args.dot {
        write_text(dot_path, &dot_with_provenance(&diff.to_dot("difference"), &prov)?)?;
    }
    if let Some(json_path) = &args.json {
        write_json_artifact(json_path, &prov, "diff", serde_json::to_value(&diff)?)?;
    }
    Ok(())
}

fn run_paths(command: &Command, args: &PathsArgs) -> Result<()> {
    let (seqs, _) = args.input.ingest()?;
    let prov = provenance(command)?;
    let mut rows: Vec<(String, f64, Vec<String>)> = Vec::new();
    match load_model(&args.model)? {
        AnyModel::Mm(m) => {
            let h = HiddenMarkovModel::from_markov(&m);
            decode_with(&h, &seqs, &mut rows);
        }
        AnyModel::Hmm(h) => decode_with(&h, &seqs, &mut rows),
        AnyModel::Mixture(m) => {
            let cov = args.cov.load(&seqs, &args.input)?;
            let priors = cluster_priors(&m.coefficients, &m.design, &cov)?;
            let block = joint_block_model(&m)?;
            for (i, (row, prior)) in seqs.rows().zip(&priors).enumerate() {
                let h = block.subject_hmm(prior)?;
                let path = viterbi_path(&h, row);
                rows.push((
                    seqs.ids()[i].clone(),
                    path.log_probability,
                    path.states.iter().map(|&s| h.state_labels[s].clone()).collect(),
                ));
            }
        }
    }
    let mut out = format!("# provenance: {}\n", serde_json::to_string(&prov)?);
    let _ = write!(out, "id,log_probability");
    for t in 1..=seqs.n_periods() {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    for (id, logp, labels) in rows {
        let _ = write!(out, "{id},{logp}");
        for t in 0..seqs.n_periods() {
            let _ = write!(out, ",{}", labels.get(t).map(String::as_str).unwrap_or(""));
        }
        out.push('\n');
    }
    write_text(&args.out, &out)?;
    println!("wrote hidden paths for {} sequences to {}", seqs.n_sequences(), args.out.display());
    Ok(())
}

fn decode_with(h: &HiddenMarkovModel, seqs: &SequenceSet, rows: &mut Vec<(String, f64, Vec<String>)>) {
    for (i, row) in seqs.rows().enumerate() {
        let path = viterbi_path(h, row);
        rows.push((
            seqs.ids()[i].clone(),
            path.log_probability,
            path.states.iter().map(|&s| h.state_labels[s].clone()).collect(),
        ));
    }
}

fn run_simulate(command: &Command, args: &SimulateArgs) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let prov = provenance(command)?;
    let set = match load_model(&args.model)? {
        AnyModel::Mm(m) => {
            let n = args.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
            m.simulate(n, args.t, &mut rng)?
        }
        AnyModel::Hmm(h) => {
            let n = args.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
            h.simulate(n, args.t, &mut rng)?
        }
        AnyModel::Mixture(m) => {
            let cov = if args.cov.covariates.is_empty() {
                let n = args.n.ok_or_else(|| {
                    Error::InvalidInput("--n is required without a covariate file".into())
                })?;
                CovariateFrame::ids_only((1..=n).map(|i| i.to_string()).collect())
            } else {
                let path = args.cov.cov_file.as_ref().ok_or_else(|| {
                    Error::InvalidInput("--cov-file is required with --covariates".into())
                })?;
                let columns: Vec<(String, Option<Vec<String>>)> =
                    args.cov.covariates.iter().map(|c| (c.clone(), None)).collect();
                CovariateFrame::from_csv(path, args.cov.cov_id_col.as_deref(), &columns, b',')?
            };
            m.simulate(&cov, args.t, &mut rng)?.0
        }
    };
    let mut out = format!("# provenance: {}\n", serde_json::to_string(&prov)?);
    out.push_str("id");
    for label in set.time_labels() {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    for (id, row) in set.ids().iter().zip(set.rows()) {
        let _ = write!(out, "{id}");
        for cell in row {
            let token = match cell {
                Cell::Symbol(m) => set.alphabet().symbol(*m),
                Cell::Unknown => crate::seqdata::UNKNOWN_TOKEN,
                Cell::Padding => "",
            };
            let _ = write!(out, ",{token}");
        }
        out.push('\n');
    }
    write_text(&args.out, &out)?;
    println!("wrote {} simulated sequences to {}", set.n_sequences(), args.out.display());
    Ok(())
}

fn run_bic(command: &Command, args: &BicArgs) -> Result<()> {
    let (seqs, _) = args.input.ingest()?;
    let mut scored: Vec<(String, ModelScore)> = Vec::new();
    for path in &args.models {
        let score = match load_model(path)? {
            AnyModel::Mm(m) => bic_markov(&m, &seqs)?,
            AnyModel::Hmm(h) => bic_hmm(&h, &seqs)?,
            AnyModel::Mixture(m) => {
                let cov = args.cov.load(&seqs, &args.input)?;
                bic_mixture(&m, &cov, &seqs)?
            }
        };
        scored.push((path.display().to_string(), score));
    }
    scored.sort_by(|a, b| a.1.bic.total_cmp(&b.1.bic));
    let name_width = scored.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    println!("{:<name_width$} {:>14} {:>6} {:>8} {:>14}", "model", "logLik", "df", "n", "BIC");
    for (name, score) in &scored {
        println!(
            "{name:<name_width$} {:>14.3} {:>6} {:>8} {:>14.3}",
            score.log_likelihood, score.free_parameters, score.n_observations, score.bic
        );
    }
    if let Some(out) = &args.out {
        let prov = provenance(command)?;
        let table: Vec<serde_json::Value> = scored
            .iter()
            .map(|(name, score)| {
                Ok(serde_json::json!({ "model": name, "score": serde_json::to_value(score)? }))
            })
            .collect::<Result<_>>()?;
        write_json_artifact(out, &prov, "bic", serde_json::Value::Array(table))?;
    }
    Ok(())
}

fn run_summary(command: &Command, args: &SummaryArgs) -> Result<()> {
    let (seqs, _) = args.input.ingest()?;
    let model = match load_model(&args.model)? {
        AnyModel::Mixture(m) => m,
        _ => return Err(Error::InvalidInput("summary needs a mixture model (mmm or mhmm)".into())),
    };
    let cov = args.cov.load(&seqs, &args.input)?;
    let summary = summarize(&model, &cov, &seqs)?;
    print!("{summary}");
    if let Some(out) = &args.out {
        let prov = provenance(command)?;
        write_json_artifact(out, &prov, "summary", serde_json::to_value(&summary)?)?;
    }
    Ok(())
}
