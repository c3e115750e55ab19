//! The `greenspoof` command line: `pool`, `train`, `eval`, `sweep`, `budget`
//! and `report`.
//!
//! Options come from an optional TOML file (`--config`) and are overridden by
//! flags. Every command that writes files also writes `manifest.json`; Markdown
//! reports end with the manifest digest. Exit codes: 0 success, 2 usage or
//! missing input, 3 data or format error, 4 runtime error.
//!
//! Config schema (all keys optional):
//!
//! ```toml
//! seed = 1919
//! jobs = 4
//! data_root = "data/"            # else $GREENSPOOF_DATA_ROOT
//! algorithms = ["logreg", "svm_rbf"]
//! layers = [0, 1, 2]
//! standardize = false
//! mlp_head = "sigmoid"           # or "softmax_pair"
//! threshold = 0.5                # F1 threshold override
//! timings = false                # wall-clock seconds in reports
//! allow_unlabeled_eval = false
//! input_seconds = 3.5            # average utterance length for MACs
//!
//! [grid]                         # restrict a grid to listed cells
//! logreg = ["C=0.1", "C=10"]
//!
//! [encoder]                      # full override of the BASE encoder shape
//! ```

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::budget::{cost_report, mac_breakdown, param_breakdown, EncoderConfig, SliceSpec};
use crate::classifiers::{read_model_file, write_model_file, Algorithm, OutputHead};
use crate::error::{Error, Result};
use crate::features::pool;
use crate::metrics::{eer, f1, write_scores, ScoreRow, ScoredSet};
use crate::selection::{
    render_grid, render_sweep, run_grid, run_sweep, write_grid_report, write_sweep_report,
    DataLayout, GridResult, GridSpec, ReportFormat, ReportOptions, SweepResult, DEFAULT_SEED,
};
use crate::store::{
    assemble, parse_protocol_file, read_embeddings_file, write_gaie, LayerDataset, Partition,
};

pub use manifest::{file_digest, RunManifest};

pub const DATA_ROOT_ENV: &str = "GREENSPOOF_DATA_ROOT";

#[derive(Debug, Parser)]
#[command(
    name = "greenspoof",
    version,
    about = "Deepfake detection on frozen speech embeddings with classical back-ends"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (default 1919).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for grid search and sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average frames of every record into a frames=1 file.
    Pool { input: PathBuf, output: PathBuf },
    /// Grid-search one algorithm on one layer and save the winner.
    Train(TrainArgs),
    /// Score an embedding file with a saved model.
    Eval(EvalArgs),
    /// Grid-search every requested algorithm on every requested layer.
    Sweep(SweepArgs),
    /// Parameter and MAC budget of an encoder slice.
    Budget(BudgetArgs),
    /// Re-render a saved grid.json or sweep.json.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding `{partition}_{layer}.gaie` and `protocol_{partition}.txt`.
    #[arg(long, env = DATA_ROOT_ENV)]
    pub data_root: Option<PathBuf>,
    #[arg(long)]
    pub standardize: bool,
    /// `sigmoid` or `softmax_pair`.
    #[arg(long)]
    pub mlp_head: Option<String>,
    /// F1 decision threshold override.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Record wall-clock training seconds in reports (makes reruns differ).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long)]
    pub layer: u16,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for model.gaim, grid.* and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Embedding file to score.
    #[arg(long)]
    pub input: PathBuf,
    /// Labels; without it metrics are suppressed.
    #[arg(long)]
    pub protocol: Option<PathBuf>,
    #[arg(long)]
    pub scores_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// Comma-separated layers, or ranges such as `0-12`.
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub allow_unlabeled_eval: bool,
    #[arg(long)]
    pub input_seconds: Option<f64>,
    #[arg(long)]
    pub report_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub keep_layers: usize,
    #[arg(long)]
    pub input_seconds: Option<f64>,
    /// Downstream algorithm whose grid gives H.
    #[arg(long, default_value = "logreg")]
    pub algorithm: String,
    /// Training-set cardinality D.
    #[arg(long, default_value_t = 0)]
    pub train_size: usize,
    /// Trainable parameters of the downstream model, when known.
    #[arg(long)]
    pub trainable: Option<usize>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A grid.json or sweep.json written earlier.
    #[arg(long)]
    pub input: PathBuf,
    /// csv, md or json.
    #[arg(long, default_value = "md")]
    pub format: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub data_root: Option<PathBuf>,
    pub algorithms: Option<Vec<String>>,
    pub layers: Option<Vec<u16>>,
    pub standardize: Option<bool>,
    pub mlp_head: Option<String>,
    pub threshold: Option<f64>,
    pub timings: Option<bool>,
    pub allow_unlabeled_eval: Option<bool>,
    pub input_seconds: Option<f64>,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<String>>,
    pub encoder: Option<EncoderConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput {
                path: path.to_path_buf(),
            },
            _ => Error::Io(e),
        })?;
        toml::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Options after merging config file and flags; echoed in the manifest.
/// `jobs` is left out on purpose: it never changes results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub data_root: Option<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub layers: Vec<u16>,
    pub standardize: bool,
    pub mlp_head: OutputHead,
    pub threshold: Option<f64>,
    pub timings: bool,
    pub allow_unlabeled_eval: bool,
    pub input_seconds: f64,
    pub grid: BTreeMap<String, Vec<String>>,
    pub encoder: EncoderConfig,
}

impl Resolved {
    fn grid(&self, algorithm: Algorithm) -> Result<GridSpec> {
        let mut g = GridSpec::table1(algorithm)
            .with_seed(self.seed)
            .with_standardize(self.standardize)
            .with_threshold(self.threshold)
            .with_mlp_head(self.mlp_head);
        if let Some(cells) = self.grid.get(algorithm.name()) {
            g = g.restrict(cells)?;
        }
        Ok(g)
    }

    fn layout(&self) -> Result<DataLayout> {
        let root = self.data_root.clone().ok_or_else(|| {
            Error::usage(format!(
                "no data root: pass --data-root or set {DATA_ROOT_ENV}"
            ))
        })?;
        Ok(DataLayout {
            root,
            allow_unlabeled_eval: self.allow_unlabeled_eval,
        })
    }

    fn report_options(&self, footer: String) -> ReportOptions {
        ReportOptions {
            timings: self.timings,
            footer: Some(footer),
            ..ReportOptions::default()
        }
    }
}

/// Parses `0-12`, `2`, `0,3,5-7`.
pub fn parse_layers(s: &str) -> Result<Vec<u16>> {
    let bad = || Error::usage(format!("bad layer list {s:?}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u16, u16) = (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                );
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

struct Overrides<'a> {
    data: Option<&'a DataArgs>,
    algorithms: Option<Vec<String>>,
    layers: Option<Vec<u16>>,
    allow_unlabeled_eval: bool,
    input_seconds: Option<f64>,
}

fn resolve(cli: &Cli, file: &FileConfig, o: Overrides<'_>) -> Result<Resolved> {
    let names = o
        .algorithms
        .or_else(|| file.algorithms.clone())
        .unwrap_or_else(|| {
            Algorithm::ALL
                .iter()
                .map(|a| a.name().to_string())
                .collect()
        });
    let algorithms = names
        .iter()
        .map(|n| n.parse::<Algorithm>())
        .collect::<Result<Vec<_>>>()?;
    for key in file.grid.keys() {
        key.parse::<Algorithm>()?;
    }
    let head = o
        .data
        .and_then(|d| d.mlp_head.clone())
        .or_else(|| file.mlp_head.clone());
    let mlp_head = match head {
        Some(h) => h.parse()?,
        None => OutputHead::Sigmoid,
    };
    let encoder = file.encoder.clone().unwrap_or_else(EncoderConfig::base);
    encoder.validate()?;
    Ok(Resolved {
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        data_root: o
            .data
            .and_then(|d| d.data_root.clone())
            .or_else(|| file.data_root.clone()),
        algorithms,
        layers: o
            .layers
            .or_else(|| file.layers.clone())
            .unwrap_or_else(|| (0..=12).collect()),
        standardize: o.data.is_some_and(|d| d.standardize) || file.standardize.unwrap_or(false),
        mlp_head,
        threshold: o.data.and_then(|d| d.threshold).or(file.threshold),
        timings: o.data.is_some_and(|d| d.timings) || file.timings.unwrap_or(false),
        allow_unlabeled_eval: o.allow_unlabeled_eval || file.allow_unlabeled_eval.unwrap_or(false),
        input_seconds: o.input_seconds.or(file.input_seconds).unwrap_or(3.5),
        grid: file.grid.clone(),
        encoder,
    })
}

fn jobs(cli: &Cli, file: &FileConfig) -> usize {
    cli.jobs
        .or(file.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("greenspoof: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Pool { input, output } => cmd_pool(input, output),
        Command::Train(a) => cmd_train(cli, &file, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(cli, &file, a),
        Command::Budget(a) => cmd_budget(cli, &file, a),
        Command::Report(a) => cmd_report(a),
    }
}

pub fn cmd_pool(input: &Path, output: &Path) -> Result<()> {
    let file = read_embeddings_file(input)?;
    let pooled = file
        .records
        .iter()
        .map(|r| pool(r).to_record(r.label))
        .collect::<Result<Vec<_>>>()?;
    let w = std::io::BufWriter::new(fs::File::create(output)?);
    write_gaie(file.header.dim, file.header.layer, &pooled, w)?;
    println!(
        "pooled {} records (layer {}, dim {}) -> {}",
        pooled.len(),
        file.header.layer,
        file.header.dim,
        output.display()
    );
    Ok(())
}

fn empty_eval(layer: u16) -> LayerDataset<crate::features::PooledVector> {
    LayerDataset {
        layer,
        partition: Partition::Eval,
        items: Vec::new(),
    }
}

fn cmd_train(cli: &Cli, file: &FileConfig, a: &TrainArgs) -> Result<()> {
    let opts = resolve(
        cli,
        file,
        Overrides {
            data: Some(&a.data),
            algorithms: a.algorithm.clone().map(|n| vec![n]),
            layers: Some(vec![a.layer]),
            allow_unlabeled_eval: false,
            input_seconds: None,
        },
    )?;
    if opts.algorithms.len() != 1 {
        return Err(Error::usage("train needs exactly one algorithm"));
    }
    let algorithm = opts.algorithms[0];
    let layout = opts.layout()?;
    let load = |p: Partition| {
        layout
            .load_partition(p, a.layer)?
            .ok_or_else(|| Error::MissingInput {
                path: layout.gaie_path(p, a.layer),
            })
    };
    let train = load(Partition::Train)?;
    let dev = load(Partition::Dev)?;
    let spec = opts.grid(algorithm)?;
    let outcome = run_grid(&spec, &train, &dev, &empty_eval(a.layer), jobs(cli, file))?;

    let inputs = [
        layout.gaie_path(Partition::Train, a.layer),
        layout.gaie_path(Partition::Dev, a.layer),
        layout.protocol_path(Partition::Train),
        layout.protocol_path(Partition::Dev),
    ];
    let manifest = RunManifest::new("train", cli.config.as_deref(), &opts, &inputs)?;
    fs::create_dir_all(&a.out)?;
    write_model_file(&outcome.model, &a.out.join("model.gaim"))?;
    write_grid_report(
        &outcome.result,
        &a.out,
        &opts.report_options(manifest.footer()),
    )?;
    manifest.write(&a.out.join("manifest.json"))?;
    let chosen = outcome.result.chosen_cell();
    println!(
        "{} layer {}: chosen {} (dev F1 {:.4}, dev EER {:.2}%), {} parameters -> {}",
        algorithm,
        a.layer,
        chosen.hyper.canonical(),
        chosen.dev_f1.unwrap_or(0.0),
        100.0 * chosen.dev_eer.unwrap_or(0.0),
        outcome.result.param_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let bundle = read_model_file(&a.model)?;
    let file = read_embeddings_file(&a.input)?;
    if file.header.dim as usize != bundle.scorer.dim {
        return Err(Error::usage(format!(
            "model expects dim {}, {} has dim {}",
            bundle.scorer.dim,
            a.input.display(),
            file.header.dim
        )));
    }
    if file.header.layer != bundle.layer {
        log::warn!(
            "model was trained on layer {}, input is layer {}",
            bundle.layer,
            file.header.layer
        );
    }
    let entries = match &a.protocol {
        Some(p) => parse_protocol_file(p)?,
        None => Vec::new(),
    };
    let pooled = file.records.iter().map(pool).collect();
    let ds = assemble(pooled, &entries, Partition::Eval, true)?;
    let rows = ds
        .items
        .iter()
        .map(|i| {
            Ok(ScoreRow {
                utt_id: i.utt_id.clone(),
                score: bundle.score(&i.features.values)?,
                label: i.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_scores(
        &rows,
        std::io::BufWriter::new(fs::File::create(&a.scores_out)?),
    )?;
    println!(
        "scored {} utterances -> {}",
        rows.len(),
        a.scores_out.display()
    );
    if rows.iter().any(|r| !r.label.is_known()) {
        println!("labels unavailable for some utterances: metrics suppressed");
        return Ok(());
    }
    let set = ScoredSet::new(
        rows.iter().map(|r| r.score).collect(),
        rows.iter().map(|r| r.label).collect(),
    )?;
    println!("EER {:.2}%", 100.0 * eer(&set));
    println!(
        "F1 {:.4} (threshold {})",
        f1(&set, bundle.threshold),
        bundle.threshold
    );
    Ok(())
}

fn cmd_sweep(cli: &Cli, file: &FileConfig, a: &SweepArgs) -> Result<()> {
    let opts = resolve(
        cli,
        file,
        Overrides {
            data: Some(&a.data),
            algorithms: a.algorithms.clone(),
            layers: a.layers.as_deref().map(parse_layers).transpose()?,
            allow_unlabeled_eval: a.allow_unlabeled_eval,
            input_seconds: a.input_seconds,
        },
    )?;
    let layout = opts.layout()?;
    if !layout.root.is_dir() {
        return Err(Error::MissingInput {
            path: layout.root.clone(),
        });
    }
    let grids = opts
        .algorithms
        .iter()
        .map(|&alg| opts.grid(alg))
        .collect::<Result<Vec<_>>>()?;
    let result = run_sweep(&grids, &opts.layers, &layout, jobs(cli, file))?;

    let mut inputs = Vec::new();
    for p in [Partition::Train, Partition::Dev, Partition::Eval] {
        inputs.push(layout.protocol_path(p));
        for &l in &opts.layers {
            inputs.push(layout.gaie_path(p, l));
        }
    }
    let manifest = RunManifest::new("sweep", cli.config.as_deref(), &opts, &inputs)?;
    let ropts = opts.report_options(manifest.footer());
    write_sweep_report(&result, &a.report_dir, &ropts)?;

    if let Some(best) = result.argmin {
        let grid = opts.grid(best.algorithm)?;
        let slice = SliceSpec::new(usize::from(best.layer), &opts.encoder)?;
        let winner = result
            .entry(best.algorithm, best.layer)
            .and_then(|e| e.result())
            .expect("argmin refers to a completed entry");
        let report = cost_report(
            &grid,
            winner.train_size,
            slice,
            &opts.encoder,
            opts.input_seconds,
            Some(winner.param_count()),
        )?;
        fs::write(a.report_dir.join("budget.json"), report.to_json() + "\n")?;
        println!(
            "lowest {} EER: {} on layer {} ({:.2}%); slice of {} layers: {:.2} GMACs, {} frozen parameters",
            result.basis.as_str(),
            best.algorithm,
            best.layer,
            100.0 * best.eer,
            best.layer,
            report.e_proxy_gmacs,
            report.frozen_param_count
        );
    }
    manifest.write(&a.report_dir.join("manifest.json"))?;
    println!(
        "{} grid searches -> {}",
        result.entries.len(),
        a.report_dir.display()
    );
    Ok(())
}

fn cmd_budget(cli: &Cli, file: &FileConfig, a: &BudgetArgs) -> Result<()> {
    let opts = resolve(
        cli,
        file,
        Overrides {
            data: None,
            algorithms: Some(vec![a.algorithm.clone()]),
            layers: None,
            allow_unlabeled_eval: false,
            input_seconds: a.input_seconds,
        },
    )?;
    let cfg = &opts.encoder;
    let slice = SliceSpec::new(a.keep_layers, cfg)?;
    let grid = opts.grid(opts.algorithms[0])?;
    let report = cost_report(
        &grid,
        a.train_size,
        slice,
        cfg,
        opts.input_seconds,
        a.trainable,
    )?;
    let text = if a.json {
        report.to_json() + "\n"
    } else {
        budget_table(cfg, slice, opts.input_seconds, &report)?
    };
    match &a.out {
        Some(p) => fs::write(p, &text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn budget_table(
    cfg: &EncoderConfig,
    slice: SliceSpec,
    seconds: f64,
    report: &crate::budget::CostReport,
) -> Result<String> {
    use std::fmt::Write as _;
    let p = param_breakdown(cfg, slice);
    let m = mac_breakdown(cfg, slice, seconds)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "slice: feature encoder + {} transformer layer(s)",
        slice.keep_layers
    );
    let _ = writeln!(
        s,
        "input: {seconds} s = {} samples -> {} frames",
        m.samples, m.frames
    );
    let _ = writeln!(s, "\n{:<22}{:>14}{:>12}", "block", "params", "GMACs");
    let rows = [
        (
            "conv feature encoder",
            p.feature_encoder,
            m.conv.iter().sum::<f64>(),
        ),
        (
            "feature projection",
            p.feature_projection,
            m.feature_projection,
        ),
        ("positional conv", p.positional_conv, m.positional_conv),
        ("encoder norm", p.encoder_norm, 0.0),
        (
            "transformer layers",
            p.transformer_layers,
            m.transformer_layers,
        ),
    ];
    for (name, params, macs) in rows {
        let _ = writeln!(s, "{name:<22}{params:>14}{:>12.3}", macs / 1e9);
    }
    let _ = writeln!(s, "{:<22}{:>14}{:>12.3}", "total", p.total, m.total / 1e9);
    let _ = writeln!(
        s,
        "\ncost proxy E x D x H = {:.3} x {} x {} = {:.3}",
        report.e_proxy_gmacs, report.d, report.h, report.cost_proxy
    );
    let _ = writeln!(s, "downstream: {}", report.downstream);
    for f in &report.footnotes {
        let _ = writeln!(s, "* {f}");
    }
    Ok(s)
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let text = fs::read_to_string(&a.input).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput {
            path: a.input.clone(),
        },
        _ => Error::Io(e),
    })?;
    let opts = ReportOptions {
        timings: true,
        ..ReportOptions::default()
    };
    let out = if let Ok(sweep) = serde_json::from_str::<SweepResult>(&text) {
        render_sweep(&sweep, format, &opts)
    } else if let Ok(grid) = serde_json::from_str::<GridResult>(&text) {
        render_grid(&grid, format, &opts)
    } else {
        return Err(Error::format(
            None,
            format!("{} is neither a grid nor a sweep result", a.input.display()),
        ));
    };
    match &a.out {
        Some(p) => fs::write(p, out)?,
        None => std::io::stdout().write_all(out.as_bytes())?,
    }
    Ok(())
}
