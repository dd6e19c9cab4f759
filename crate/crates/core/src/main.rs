use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use robsel::io::{emit_csv, format_number, ingest_csv, write_string_atomic};
use robsel::pipeline::{error_json, run_fit_command, FitRunConfig, ScreenSettings};
use robsel::screening::screen_columns;
use robsel::simulation::{report_csv, report_markdown, run_study, Correlation, ErrorDist, StudyConfig};
use robsel::synth::{self, SynthConfig};
use robsel::{Condition, Error, PenaltyFamily, Result};

/// Robust penalized regression with missing covariates and measurement error.
#[derive(Parser)]
#[command(name = "robsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every (condition, penalty, h) combination on a CSV table.
    Fit(FitArgs),
    /// Run the Monte Carlo study and write its report.
    Simulate(SimulateArgs),
    /// Rank columns by absolute correlation with the response.
    Screen(ScreenArgs),
    /// Write a synthetic wide table with NA cells.
    Synth(SynthArgs),
}

/// Flags shared by every command. Values given here override the JSON
/// config, which overrides the built-in defaults.
#[derive(Args)]
struct Common {
    /// JSON run-config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated loss tuning parameters.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    /// Comma-separated penalty families (lasso, scad, mcp, atan).
    #[arg(long, value_delimiter = ',')]
    penalty: Option<Vec<PenaltyFamily>>,
    /// Comma-separated conditions (full, error, missing, none).
    #[arg(long, value_delimiter = ',')]
    condition: Option<Vec<Condition>>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Name of the response column.
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    na_token: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit all columns instead of screening first.
    #[arg(long)]
    no_screen: bool,
    #[arg(long)]
    screen_subsample: Option<usize>,
    #[arg(long)]
    screen_keep: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Report CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Markdown report path; defaults to the CSV path with `.md`.
    #[arg(long)]
    markdown: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    error_dist: Option<Vec<ErrorDist>>,
    #[arg(long, value_delimiter = ',')]
    correlation: Option<Vec<Correlation>>,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long)]
    na_token: Option<String>,
    /// Columns to keep.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Columns drawn before ranking, capped at the table width; defaults to
    /// all columns.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mut cfg: FitRunConfig = load_config(args.common.config.as_deref())?;
    let c = args.common;
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.h {
        cfg.hs = v;
    }
    if let Some(v) = c.penalty {
        cfg.penalties = v;
    }
    if let Some(v) = c.condition {
        cfg.conditions = v;
    }
    if let Some(v) = args.input {
        cfg.input = v;
    }
    if let Some(v) = args.response {
        cfg.response_column = v;
    }
    if args.na_token.is_some() {
        cfg.na_token = args.na_token;
    }
    if let Some(v) = args.out {
        cfg.output_dir = v;
    }
    if args.no_screen {
        cfg.screen = None;
    } else if args.screen_subsample.is_some() || args.screen_keep.is_some() {
        let s = cfg.screen.get_or_insert_with(ScreenSettings::default);
        if let Some(v) = args.screen_subsample {
            s.subsample_size = v;
        }
        if let Some(v) = args.screen_keep {
            s.keep = v;
        }
    }
    if let Some(v) = args.folds {
        cfg.cv_folds = v;
    }
    if let Some(v) = args.top {
        cfg.top_features = v;
    }
    let report = run_fit_command(&cfg)?;
    let mut out = String::new();
    for r in &report.runs {
        let names: Vec<&str> = r.features.iter().map(|f| f.name.as_str()).collect();
        let _ = writeln!(
            out,
            "{} {}(h={}) f={:.4e} size={} cv={:.4} [{}]",
            r.condition,
            r.penalty,
            r.h,
            r.estimate.f_selected,
            r.size,
            r.cv_objective,
            names.join(", ")
        );
    }
    let _ = writeln!(out, "wrote {}", cfg.output_dir.display());
    emit(&out);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let mut study: StudyConfig = load_config(args.common.config.as_deref())?;
    let c = args.common;
    if let Some(v) = c.seed {
        study.seed = v;
    }
    if let Some(v) = c.h {
        study.hs = v;
    }
    if let Some(v) = c.penalty {
        study.penalties = v;
    }
    if let Some(v) = c.condition {
        study.conditions = v;
    }
    if let Some(v) = args.replications {
        study.replications = v;
    }
    if let Some(v) = args.n {
        study.n = v;
    }
    if let Some(v) = args.d {
        study.d = v;
    }
    if let Some(v) = args.error_dist {
        study.error_dists = v;
    }
    if let Some(v) = args.correlation {
        study.correlations = v;
    }
    let markdown_path = args.markdown.unwrap_or_else(|| args.out.with_extension("md"));
    if markdown_path == args.out {
        return Err(Error::Config("CSV and markdown outputs must differ".into()));
    }
    let reports = run_study(&study)?;
    let csv = report_csv(&reports);
    let mut md = report_markdown(&reports);
    let _ = write!(md, "```json\n{}\n```\n", serde_json::to_string_pretty(&study)?);
    write_string_atomic(&args.out, &csv)?;
    write_string_atomic(&markdown_path, &md)?;
    emit(&csv);
    Ok(())
}

fn run_screen(args: ScreenArgs) -> Result<()> {
    if args.input == args.out {
        return Err(Error::Config("input and output paths must differ".into()));
    }
    let data = ingest_csv(&args.input, &args.response, args.na_token.as_deref())?;
    let subsample = args.subsample.map_or(data.ncols(), |m| m.min(data.ncols()));
    let seed = args.seed.unwrap_or(20_240_101);
    let res = screen_columns(&data, args.k, subsample, seed)?;
    let mut out = String::from("rank,index,name,abs_corr,subsample_size,seed\n");
    for (rank, c) in res.selected.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            rank + 1,
            c.index,
            c.name,
            format_number(c.abs_corr),
            res.subsample_size,
            res.seed
        );
    }
    if !res.skipped.is_empty() {
        eprintln!("warning: {} columns skipped for too few present cells", res.skipped.len());
    }
    write_string_atomic(&args.out, &out)?;
    emit(&out);
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = load_config(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.rows {
        cfg.rows = v;
    }
    if let Some(v) = args.cols {
        cfg.cols = v;
    }
    let data = synth::generate(&cfg)?;
    emit_csv(&data.dataset, &args.out)?;
    let names: Vec<&String> = data.informative.iter().map(|&k| &data.dataset.column_names()[k]).collect();
    let summary = serde_json::json!({ "output": args.out, "config": cfg, "informative": names });
    emit(&format!("{summary}\n"));
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Screen(a) => run_screen(a),
        Command::Synth(a) => run_synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
