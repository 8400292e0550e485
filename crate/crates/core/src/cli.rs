//! `pcscale` command-line front end.
//!
//! Machine output goes to `--out` when given, otherwise stdout. The human
//! summary goes to stdout when `--out` is given, otherwise stderr, so stdout
//! stays pipeable. Exit codes: 0 success, 1 data error, 2 usage error.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::analysis::{self, CeilingSource, ConfigSummary, ReportFormat};
use crate::fit::{robust_fit_pipeline, FitConfig};
use crate::flops::{Algorithm, ModelConfig};
use crate::io::{self, ArtifactLabels, DataFormat, FitArtifact, StepContext};
use crate::phases::{classify_phases, min_val_loss, phase_boundaries, PhaseThresholds};
use crate::scaling::{decompose, ConstraintMode, SigmoidParams};
use crate::series::RunSeries;
use crate::synth::{self, OutlierLabels, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "pcscale",
    version,
    about = "Compute-performance scaling analysis for post-training runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-step and cumulative training FLOPs for a step-level log.
    Flops(FlopsArgs),
    /// Robust sigmoid fit of a compute-performance run; writes a fit artifact.
    Fit(FitArgs),
    /// Label SFT validation-loss checkpoints with sub-phases.
    Phases(PhasesArgs),
    /// Split post-training performance into SFT gain and RL plasticity.
    Decompose(DecomposeArgs),
    /// Pearson correlation between minimum validation loss and ceiling.
    Correlate(CorrelateArgs),
    /// Sample a run from a known curve with seeded noise and outliers.
    Synth(SynthArgs),
    /// Assemble fit artifacts into the per-configuration report table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Sft,
    Grpo,
    Dapo,
    Hybrid,
    Luffy,
    Srft,
    Upt,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Sft => Algorithm::Sft,
            AlgorithmArg::Grpo => Algorithm::Grpo,
            AlgorithmArg::Dapo => Algorithm::Dapo,
            AlgorithmArg::Hybrid | AlgorithmArg::Luffy | AlgorithmArg::Srft => Algorithm::Hybrid,
            AlgorithmArg::Upt => Algorithm::Upt,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Headroom,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Markdown,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SeriesFormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CeilingArg {
    Auto,
    Fitted,
    Observed,
}

/// Model config and default algorithm for step-level logs.
#[derive(Debug, Clone, Args)]
pub struct StepFlags {
    /// Model architecture file (`key = value`).
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Algorithm for rows without an `algorithm` column.
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
}

impl StepFlags {
    fn load(&self) -> CliResult<Option<ModelConfig>> {
        self.model
            .as_deref()
            .map(io::read_model_config)
            .transpose()
            .map_err(data)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitFlags {
    /// Fit settings file (`key = value`; keys train_fraction, z_threshold, use_lts,
    /// lts_alpha, max_outlier_rounds, nls_max_iters, nls_tolerance,
    /// multistart_count, seed, mode, pin_p_start). Flags override it.
    #[arg(long, value_name = "PATH")]
    pub fit_config: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Modified z-score cutoff.
    #[arg(long)]
    pub z_threshold: Option<f64>,
    /// Refine with least trimmed squares after outlier removal.
    #[arg(long)]
    pub use_lts: bool,
    /// LTS coverage fraction.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_outlier_rounds: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Number of optimizer starts.
    #[arg(long)]
    pub multistart: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

impl FitFlags {
    fn config(&self) -> CliResult<FitConfig> {
        let mut cfg = match &self.fit_config {
            Some(p) => io::read_fit_config(p, FitConfig::default()).map_err(usage)?,
            None => FitConfig::default(),
        };
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        if let Some(v) = self.z_threshold {
            cfg.z_threshold = v;
        }
        if self.use_lts {
            cfg.use_lts = true;
        }
        if let Some(v) = self.alpha {
            cfg.lts_alpha = v;
        }
        if let Some(v) = self.max_outlier_rounds {
            cfg.max_outlier_rounds = v;
        }
        if let Some(v) = self.max_iters {
            cfg.nls_max_iters = v;
        }
        if let Some(v) = self.tolerance {
            cfg.nls_tolerance = v;
        }
        if let Some(v) = self.multistart {
            cfg.multistart_count = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Headroom => ConstraintMode::Headroom,
                ModeArg::Unconstrained => ConstraintMode::Unconstrained,
            };
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FlopsArgs {
    /// Model architecture file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Step-level training log (CSV or JSON lines).
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Algorithm for rows without an `algorithm` column.
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Run file: x_exaflops/x_flops or step columns, plus performance.
    pub run: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
    #[command(flatten)]
    pub steps: StepFlags,
    /// Configuration name recorded for the report.
    #[arg(long)]
    pub config_name: Option<String>,
    #[arg(long)]
    pub sft_step: Option<u64>,
    #[arg(long)]
    pub x_sft: Option<f64>,
    #[arg(long)]
    pub min_val_loss: Option<f64>,
    /// Artifact destination.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PhasesArgs {
    /// Loss log: x_exaflops/x_flops or step columns, plus val_loss.
    pub loss_log: PathBuf,
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta2: f64,
    /// Trailing-median smoothing window (off by default).
    #[arg(long, value_name = "N")]
    pub smooth: Option<usize>,
    #[command(flatten)]
    pub steps: StepFlags,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    /// Base-model performance before any post-training.
    #[arg(long)]
    pub p0: f64,
    /// SFT run; its last point gives x_sft and P_sft.
    #[arg(long, value_name = "PATH")]
    pub sft: PathBuf,
    /// RL run started from that checkpoint, x in RL compute.
    #[arg(long, value_name = "PATH")]
    pub rl: PathBuf,
    #[command(flatten)]
    pub fit: FitFlags,
    #[command(flatten)]
    pub steps: StepFlags,
    #[arg(long)]
    pub config_name: Option<String>,
    #[arg(long)]
    pub sft_step: Option<u64>,
    /// RL compute values at which to tabulate the RL gain.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Also write the RL fit artifact here.
    #[arg(long, value_name = "PATH")]
    pub artifact: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Summaries (config_name, min_val_loss, max_p_post[, a_post]) or a JSON report.
    pub summaries: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub ceiling: CeilingArg,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub p_start: f64,
    #[arg(long)]
    pub ceiling: f64,
    #[arg(long)]
    pub c_mid: f64,
    #[arg(long)]
    pub steepness: f64,
    /// Explicit ascending x grid; overrides the log grid.
    #[arg(long, value_delimiter = ',')]
    pub x_grid: Vec<f64>,
    /// Log-grid start (default 0.1 * c_mid).
    #[arg(long)]
    pub x_min: Option<f64>,
    /// Log-grid end (default 10 * c_mid).
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: SeriesFormatArg,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Outlier sidecar path (default `<out>.outliers.json`).
    #[arg(long, value_name = "PATH")]
    pub outliers_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Directory of fit artifacts (`*.json`).
    pub artifacts: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            let write_result = match &out.dest {
                Some(path) => io::write_text(path, &out.machine).map_err(data).map(|_| {
                    let _ = stdout.write_all(out.summary.as_bytes());
                }),
                None => {
                    let _ = stdout.write_all(out.machine.as_bytes());
                    let _ = stderr.write_all(out.summary.as_bytes());
                    Ok(())
                }
            };
            let _ = stderr.write_all(out.warnings.as_bytes());
            match write_result {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "{e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

/// Rendered result of one command.
#[derive(Debug, Clone)]
pub struct Output {
    pub machine: String,
    pub summary: String,
    pub warnings: String,
    pub dest: Option<PathBuf>,
}

impl Output {
    fn new(machine: String, summary: String, dest: &Option<PathBuf>) -> Self {
        Output {
            machine,
            summary,
            warnings: String::new(),
            dest: dest.clone(),
        }
    }
}

pub fn execute(cmd: &Command) -> CliResult<Output> {
    match cmd {
        Command::Flops(a) => cmd_flops(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Phases(a) => cmd_phases(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Plain decimal inside `[1e-5, 1e16)`, scientific outside; both shortest
/// round-trip.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn cmd_flops(a: &FlopsArgs) -> CliResult<Output> {
    let cfg = io::read_model_config(&a.config).map_err(data)?;
    let text = io::read_text(&a.log).map_err(data)?;
    let log = io::parse_train_log(&text, DataFormat::from_path(&a.log), a.algorithm.map(Into::into)).map_err(data)?;
    let flops = log.flops_exact(&cfg).map_err(data)?;
    let mut csv = String::from("step,step_flops,cumulative_exaflops\n");
    for (r, (per_step, total)) in log.records.iter().zip(&flops) {
        let _ = writeln!(csv, "{},{},{}", r.step, per_step, format_number(*total as f64 / 1e18));
    }
    let total = flops.last().map_or(0.0, |t| t.1 as f64 / 1e18);
    let summary = format!("{} records, total {} exaFLOPs\n", log.len(), format_number(total));
    Ok(Output::new(csv, summary, &a.out))
}

fn step_context<'a>(flags: &StepFlags, model: Option<&'a ModelConfig>) -> StepContext<'a> {
    StepContext {
        model,
        default_algorithm: flags.algorithm.map(Into::into),
    }
}

fn load_run(path: &Path, flags: &StepFlags) -> CliResult<RunSeries> {
    let model = flags.load()?;
    io::read_run_series(path, &step_context(flags, model.as_ref())).map_err(data)
}

fn fit_summary(art: &FitArtifact) -> String {
    let r = &art.result;
    let p = &r.params;
    let opt = |v: Option<f64>, digits: usize| v.map_or("n/a".to_string(), |v| format!("{v:.digits$}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "run        {} (train {}, validation {})",
        art.run_id, r.n_train, r.n_val
    );
    let _ = writeln!(s, "P_start    {:.3}", p.p_start);
    let _ = writeln!(s, "A          {:.3}", p.ceiling);
    let _ = writeln!(s, "C_mid      {:.3}", p.c_mid);
    let _ = writeln!(s, "B          {:.3}", p.steepness);
    let _ = writeln!(s, "PL         {:.3}", r.plasticity());
    let _ = writeln!(s, "R2_train   {} (inliers)", opt(r.r2_train, 4));
    let _ = writeln!(s, "RMSE_val   {}", opt(r.rmse_val, 4));
    let removed: Vec<usize> = r.removed_outliers.iter().map(|o| o.index).collect();
    let _ = writeln!(s, "removed    {} {:?}", removed.len(), removed);
    if art.config.use_lts {
        let _ = writeln!(s, "LTS        alpha {}", art.config.lts_alpha);
    }
    if !r.converged {
        let _ = writeln!(s, "note       optimizer did not report convergence");
    }
    s
}

fn max_y(run: &RunSeries) -> Option<f64> {
    run.points.iter().map(|p| p.y).reduce(f64::max)
}

fn cmd_fit(a: &FitArgs) -> CliResult<Output> {
    let cfg = a.fit.config()?;
    let run = load_run(&a.run, &a.steps)?;
    let result = robust_fit_pipeline(&run, &cfg).map_err(data)?;
    let labels = ArtifactLabels {
        config_name: a.config_name.clone(),
        sft_step: a.sft_step,
        x_sft: a.x_sft,
        min_val_loss: a.min_val_loss,
        max_performance: max_y(&run),
    };
    let warnings: String = result.warnings.iter().map(|w| format!("warning: {w}\n")).collect();
    let art = FitArtifact::new(run.run_id.clone(), labels, cfg, result);
    let mut out = Output::new(art.to_json(), fit_summary(&art), &a.out);
    out.warnings = warnings;
    Ok(out)
}

fn cmd_phases(a: &PhasesArgs) -> CliResult<Output> {
    let thr = PhaseThresholds::new(a.delta, a.delta2).map_err(usage)?;
    if a.smooth == Some(0) {
        return Err(CliError::Usage("--smooth window must be >= 1".into()));
    }
    let model = a.steps.load()?;
    let raw = io::read_loss_series(&a.loss_log, &step_context(&a.steps, model.as_ref())).map_err(data)?;
    let series = match a.smooth {
        Some(w) => raw.smoothed(w),
        None => raw.clone(),
    };
    let labels = classify_phases(&series, &thr).map_err(data)?;
    let intervals = phase_boundaries(&labels, &series).map_err(data)?;
    let (x_min, l_min) = min_val_loss(&series).map_err(data)?;

    let mut csv = String::new();
    csv.push_str(if a.smooth.is_some() {
        "x_exaflops,val_loss,smoothed_loss,label\n"
    } else {
        "x_exaflops,val_loss,label\n"
    });
    for ((p, s), l) in raw.points.iter().zip(&series.points).zip(&labels) {
        if a.smooth.is_some() {
            let _ = writeln!(csv, "{},{},{},{}", p.x, p.loss, s.loss, l);
        } else {
            let _ = writeln!(csv, "{},{},{}", p.x, p.loss, l);
        }
    }
    let mut s = String::new();
    if let Some(w) = a.smooth {
        let _ = writeln!(s, "smoothing  trailing median, window {w}");
    }
    let _ = writeln!(
        s,
        "L_min      {l_min} at x = {x_min} exaFLOPs (delta {}, delta2 {})",
        thr.delta, thr.delta2
    );
    for iv in &intervals {
        let _ = writeln!(
            s,
            "{:<13} x [{}, {}]  points {}..={}",
            iv.label.as_str(),
            iv.x_start,
            iv.x_end,
            iv.start_index,
            iv.end_index
        );
    }
    Ok(Output::new(csv, s, &a.out))
}

/// Start-point gap between the SFT endpoint and the RL run's first point
/// above which a warning is issued.
pub const START_GAP_WARN: f64 = 0.5;

#[derive(Serialize)]
struct DecomposeDoc<'a> {
    record: &'a crate::scaling::DecompositionRecord,
    row: &'a ConfigSummary,
}

fn cmd_decompose(a: &DecomposeArgs) -> CliResult<Output> {
    if !(0.0..=io::PERFORMANCE_INGEST_MAX).contains(&a.p0) {
        return Err(CliError::Usage(format!(
            "--p0 must be in [0, {}]",
            io::PERFORMANCE_INGEST_MAX
        )));
    }
    let base = a.fit.config()?;
    let sft = load_run(&a.sft, &a.steps)?;
    let rl = load_run(&a.rl, &a.steps)?;
    let last = *sft.last().ok_or_else(|| CliError::Data("SFT run is empty".into()))?;
    let (x_sft, p_sft) = (last.x, last.y);

    let mut warnings = String::new();
    let first = rl.points[0].y;
    if (first - p_sft).abs() > START_GAP_WARN {
        let _ = writeln!(
            warnings,
            "warning: RL run starts at {first}, {:.3} points from the SFT endpoint {p_sft}",
            (first - p_sft).abs()
        );
    }

    let cfg = FitConfig {
        pin_p_start: Some(p_sft),
        ..base
    };
    let fit = robust_fit_pipeline(&rl, &cfg).map_err(data)?;
    for w in &fit.warnings {
        let _ = writeln!(warnings, "warning: {w}");
    }
    let mut record = decompose(a.p0, (x_sft, p_sft), &fit.params).map_err(data)?;
    record.tabulate_rl(&a.grid).map_err(usage)?;

    let config_name = a.config_name.clone().unwrap_or_else(|| sft.run_id.clone());
    let row = ConfigSummary {
        config_name: config_name.clone(),
        sft_step: a.sft_step.unwrap_or(0),
        x_sft,
        use_lts: cfg.use_lts,
        pl_rl: Some(record.pl_rl),
        c_mid: Some(fit.params.c_mid),
        steepness: Some(fit.params.steepness),
        p_sft: Some(p_sft),
        a_post: Some(record.a_post),
        min_val_loss: None,
        max_p_post: max_y(&rl),
    };
    if let Some(path) = &a.artifact {
        let labels = ArtifactLabels {
            config_name: Some(config_name),
            sft_step: a.sft_step,
            x_sft: Some(x_sft),
            min_val_loss: None,
            max_performance: max_y(&rl),
        };
        let art = FitArtifact::new(rl.run_id.clone(), labels, cfg.clone(), fit);
        io::write_fit_artifact(&art, path).map_err(data)?;
    }

    let doc = DecomposeDoc {
        record: &record,
        row: &row,
    };
    let json = serde_json::to_string_pretty(&doc).expect("decomposition serializes") + "\n";
    let mut summary = analysis::build_report(std::slice::from_ref(&row), ReportFormat::Csv).map_err(data)?;
    let _ = writeln!(
        summary,
        "delta_sft = {:.3}, PL_rl = {:.3}, A_post = {:.3}",
        record.delta_sft, record.pl_rl, record.a_post
    );
    let mut out = Output::new(json, summary, &a.out);
    out.warnings = warnings;
    Ok(out)
}

fn looks_like_report_json(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .map(|v| v.get("format_version").is_some() && v.get("rows").is_some())
        .unwrap_or(false)
}

fn cmd_correlate(a: &CorrelateArgs) -> CliResult<Output> {
    let text = io::read_text(&a.summaries).map_err(data)?;
    let rows = if looks_like_report_json(&text) {
        analysis::parse_report_json(&text).map_err(data)?
    } else {
        io::parse_summaries(&text, DataFormat::from_path(&a.summaries)).map_err(data)?
    };
    let source = match a.ceiling {
        CeilingArg::Auto => CeilingSource::Auto,
        CeilingArg::Fitted => CeilingSource::Fitted,
        CeilingArg::Observed => CeilingSource::Observed,
    };
    let rep = analysis::ceiling_loss_correlation(&rows, source).map_err(data)?;
    let json = serde_json::to_string_pretty(&rep).expect("correlation serializes") + "\n";
    let mut s = format!("pearson r = {:.4} over {} pairs\n", rep.r, rep.pairs.len());
    for p in &rep.pairs {
        let _ = writeln!(
            s,
            "  {:<16} loss {:<8} ceiling {}",
            p.config_name, p.min_val_loss, p.ceiling
        );
    }
    Ok(Output::new(json, s, &a.out))
}

#[derive(Serialize)]
struct SynthSidecar<'a> {
    spec: &'a SynthSpec,
    outliers: &'a OutlierLabels,
}

fn cmd_synth(a: &SynthArgs) -> CliResult<Output> {
    let params = SigmoidParams::new(a.p_start, a.ceiling, a.c_mid, a.steepness);
    let x_grid = if a.x_grid.is_empty() {
        let lo = a.x_min.unwrap_or(0.1 * a.c_mid);
        let hi = a.x_max.unwrap_or(10.0 * a.c_mid);
        if !(lo > 0.0 && hi >= lo && a.points >= 1) {
            return Err(CliError::Usage(format!(
                "invalid log grid [{lo}, {hi}] with {} points",
                a.points
            )));
        }
        synth::log_space(lo, hi, a.points)
    } else {
        a.x_grid.clone()
    };
    let spec = SynthSpec {
        params,
        x_grid,
        noise_sigma: a.noise_sigma,
        outlier_fraction: a.outlier_fraction,
        outlier_shift: a.outlier_shift,
        seed: a.seed,
    };
    let sample = synth::generate(&spec).map_err(usage)?;
    let format = match a.format {
        SeriesFormatArg::Csv => DataFormat::Csv,
        SeriesFormatArg::Jsonl => DataFormat::Jsonl,
    };
    let body = io::write_run_series(&sample.series, format);

    let sidecar_path = a.outliers_out.clone().or_else(|| {
        a.out.as_ref().map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".outliers.json");
            PathBuf::from(s)
        })
    });
    if let Some(p) = &sidecar_path {
        let doc = SynthSidecar {
            spec: &spec,
            outliers: &sample.outliers,
        };
        let json = serde_json::to_string_pretty(&doc).expect("sidecar serializes") + "\n";
        io::write_text(p, &json).map_err(data)?;
    }
    let summary = format!(
        "{} points, {} outliers {:?}, generator {} seed {}\n",
        sample.series.len(),
        sample.outliers.indices.len(),
        sample.outliers.indices,
        synth::GENERATOR,
        spec.seed
    );
    Ok(Output::new(body, summary, &a.out))
}

/// Report row for a fit artifact.
pub fn summary_from_artifact(art: &FitArtifact) -> ConfigSummary {
    let p = &art.result.params;
    ConfigSummary {
        config_name: art.labels.config_name.clone().unwrap_or_else(|| art.run_id.clone()),
        sft_step: art.labels.sft_step.unwrap_or(0),
        x_sft: art.labels.x_sft.unwrap_or(0.0),
        use_lts: art.config.use_lts,
        pl_rl: Some(p.plasticity()),
        c_mid: Some(p.c_mid),
        steepness: Some(p.steepness),
        p_sft: Some(p.p_start),
        a_post: Some(p.ceiling),
        min_val_loss: art.labels.min_val_loss,
        max_p_post: art.labels.max_performance,
    }
}

fn cmd_report(a: &ReportArgs) -> CliResult<Output> {
    let arts = io::read_artifact_dir(&a.artifacts).map_err(|e| match e {
        io::IoError::Empty => CliError::Data(format!("no fit artifacts in {}", a.artifacts.display())),
        other => data(other),
    })?;
    let rows: Vec<ConfigSummary> = arts.iter().map(summary_from_artifact).collect();
    let format = match a.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
        FormatArg::Json => ReportFormat::Json,
    };
    let doc = analysis::build_report(&rows, format).map_err(data)?;
    Ok(Output::new(doc, format!("{} row(s)\n", rows.len()), &a.out))
}
